use std::fmt::Write as _;
use std::fs;

use evhand_core::event::{encode_lnes_with, parse_events, write_lnes, EventFormat, EventStream};
use evhand_core::par::{self, Execution};

use super::write;
use crate::config::{EncodeRun, EventFileFormat};
use crate::error::{CliResult, Context, Failure};

pub const INDEX_FILE: &str = "index.txt";

/// Window ends `stride, 2 * stride, ...`, the last one at or after the final
/// event.
pub fn window_ends(stream: &EventStream, stride_us: u64) -> Vec<u64> {
    let Some(last) = stream.events().last() else { return Vec::new() };
    let n = last.t.div_ceil(stride_us).max(1);
    (1..=n).map(|k| k * stride_us).collect()
}

/// Writes `lnes_NNNNNN.lns` per window and an index of
/// `window t_end_us events` rows.
pub fn encode(run: &EncodeRun, exec: Execution) -> CliResult<String> {
    let bytes = fs::read(&run.events).data_at(&run.events)?;
    let format = match run.format {
        EventFileFormat::Binary => EventFormat::BinaryV1,
        EventFileFormat::Csv => EventFormat::Csv {
            width: run.width.ok_or_else(|| Failure::usage("CSV input needs a width"))?,
            height: run.height.ok_or_else(|| Failure::usage("CSV input needs a height"))?,
        },
    };
    let stream = parse_events(&bytes, format).data_at(&run.events)?;
    let ends = window_ends(&stream, run.stride_us);
    let (w, h) = (usize::from(stream.width()), usize::from(stream.height()));

    let encoded = par::map(exec, &ends, |&t_end| -> CliResult<(usize, Vec<u8>)> {
        let window = stream.window(t_end, run.delta_t_us).map_err(Failure::usage)?;
        let surface = encode_lnes_with(&window, w, h, run.mode, Execution::Sequential).map_err(Failure::data)?;
        Ok((window.events.len(), write_lnes(&surface)))
    });
    let mut index = String::from("window\tt_end_us\tevents\n");
    for (k, (t_end, res)) in ends.iter().zip(encoded).enumerate() {
        let (n, bytes) = res?;
        write(&run.out.join(format!("lnes_{k:06}.lns")), bytes)?;
        writeln!(index, "{k}\t{t_end}\t{n}").unwrap();
    }
    write(&run.out.join(INDEX_FILE), index)?;
    Ok(format!("encoded {} windows of {} events into {}", ends.len(), stream.len(), run.out.display()))
}
