use super::{Event, EventError, EventStream, Polarity};

pub const BINARY_MAGIC: &[u8; 4] = b"EVS1";
/// Magic, width, height and record count.
pub const BINARY_HEADER_LEN: usize = 4 + 2 + 2 + 8;
/// `u64 t, u16 x, u16 y, i8 polarity`.
pub const BINARY_RECORD_LEN: usize = 13;
pub const CSV_HEADER: &str = "t_us,x,y,p";

/// On-disk event encodings. CSV carries no sensor size, so it is supplied here.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventFormat {
    BinaryV1,
    Csv { width: u16, height: u16 },
}

pub fn parse_events(bytes: &[u8], format: EventFormat) -> Result<EventStream, EventError> {
    match format {
        EventFormat::BinaryV1 => parse_binary(bytes),
        EventFormat::Csv { width, height } => parse_csv(bytes, width, height),
    }
}

pub fn write_events(stream: &EventStream, format: EventFormat) -> Vec<u8> {
    match format {
        EventFormat::BinaryV1 => write_binary(stream),
        EventFormat::Csv { .. } => write_csv(stream),
    }
}

fn parse_binary(bytes: &[u8]) -> Result<EventStream, EventError> {
    if bytes.len() < BINARY_HEADER_LEN {
        return Err(EventError::MalformedHeader(format!(
            "need {BINARY_HEADER_LEN} bytes, got {}",
            bytes.len()
        )));
    }
    if &bytes[..4] != BINARY_MAGIC {
        return Err(EventError::MalformedHeader("bad magic".into()));
    }
    let width = u16::from_le_bytes([bytes[4], bytes[5]]);
    let height = u16::from_le_bytes([bytes[6], bytes[7]]);
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let body = &bytes[BINARY_HEADER_LEN..];
    let available = body.len() / BINARY_RECORD_LEN;
    if (available as u64) < count {
        return Err(EventError::TruncatedRecord { index: available });
    }
    if body.len() != count as usize * BINARY_RECORD_LEN {
        return Err(EventError::MalformedHeader(format!(
            "record count {count} does not match {} trailing bytes",
            body.len()
        )));
    }

    let mut events = Vec::with_capacity(count as usize);
    for (index, rec) in body.chunks_exact(BINARY_RECORD_LEN).enumerate() {
        let t = u64::from_le_bytes(rec[0..8].try_into().unwrap());
        let x = u16::from_le_bytes([rec[8], rec[9]]);
        let y = u16::from_le_bytes([rec[10], rec[11]]);
        let p = rec[12] as i8;
        let polarity = Polarity::from_i64(p.into()).ok_or(EventError::InvalidPolarity {
            index,
            value: p.into(),
        })?;
        events.push(Event { t, x, y, polarity });
    }
    EventStream::new(width, height, events)
}

fn write_binary(stream: &EventStream) -> Vec<u8> {
    let mut out = Vec::with_capacity(BINARY_HEADER_LEN + stream.len() * BINARY_RECORD_LEN);
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&stream.width().to_le_bytes());
    out.extend_from_slice(&stream.height().to_le_bytes());
    out.extend_from_slice(&(stream.len() as u64).to_le_bytes());
    for e in stream.events() {
        out.extend_from_slice(&e.t.to_le_bytes());
        out.extend_from_slice(&e.x.to_le_bytes());
        out.extend_from_slice(&e.y.to_le_bytes());
        out.push(e.polarity.as_i8() as u8);
    }
    out
}

fn parse_csv(bytes: &[u8], width: u16, height: u16) -> Result<EventStream, EventError> {
    let text = std::str::from_utf8(bytes).map_err(|e| EventError::MalformedHeader(e.to_string()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => {
            return Err(EventError::MalformedHeader(format!(
                "expected {CSV_HEADER:?}, got {:?}",
                other.unwrap_or("")
            )))
        }
    }

    let mut events = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let index = events.len();
        let bad = |reason: String| EventError::MalformedRecord { index, reason };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(EventError::TruncatedRecord { index });
        }
        let t: u64 = fields[0].parse().map_err(|e| bad(format!("t: {e}")))?;
        let x: u32 = fields[1].parse().map_err(|e| bad(format!("x: {e}")))?;
        let y: u32 = fields[2].parse().map_err(|e| bad(format!("y: {e}")))?;
        let p: i64 = fields[3].parse().map_err(|e| bad(format!("p: {e}")))?;
        if x >= width.into() || y >= height.into() {
            return Err(EventError::OutOfBoundsPixel {
                index,
                x,
                y,
                width,
                height,
            });
        }
        let polarity = Polarity::from_i64(p).ok_or(EventError::InvalidPolarity { index, value: p })?;
        events.push(Event {
            t,
            x: x as u16,
            y: y as u16,
            polarity,
        });
    }
    EventStream::new(width, height, events)
}

fn write_csv(stream: &EventStream) -> Vec<u8> {
    use std::fmt::Write;
    let mut s = String::with_capacity(16 * (stream.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for e in stream.events() {
        let _ = writeln!(s, "{},{},{},{}", e.t, e.x, e.y, e.polarity.as_i8());
    }
    s.into_bytes()
}
