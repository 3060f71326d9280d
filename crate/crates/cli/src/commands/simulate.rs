use evhand_core::par::Execution;
use evhand_core::sim::{self, export_dataset, SimError};

use crate::config::SimulateRun;
use crate::error::{CliResult, Context, Failure};

pub fn simulate(run: &SimulateRun, exec: Execution) -> CliResult<String> {
    let out = sim::simulate(&run.sim, exec).map_err(|e| match e {
        SimError::InvalidSpec(_) => Failure::usage(e),
        SimError::OutOfFrustum { .. } => Failure::numeric(e),
    })?;
    let m = export_dataset(&out, &run.out).data_at(&run.out)?;
    Ok(format!(
        "simulated {} ({} frames, {} + {} events) into {}",
        m.scenario,
        m.frames,
        m.events_left,
        m.events_right,
        run.out.display()
    ))
}
