use std::io::{Read, Write};

use nalgebra::Vector3;

use super::{BinGrid, DynError, Ensemble, EnsembleState, StepDiagnostics, SwapRecord, Trajectory};
use crate::spin::Spin;

pub const SNAPSHOT_HEADER: [&str; 9] = ["id", "x", "y", "z", "vx", "vy", "vz", "ensemble", "spin"];

pub const DIAGNOSTICS_HEADER: [&str; 8] = [
    "step",
    "time",
    "mean_speed_a",
    "mean_speed_b",
    "bin_gap_before",
    "bin_gap_after",
    "swaps",
    "capped",
];

const SWAP_HEADER: [&str; 10] = [
    "step", "time", "bin_x", "bin_y", "bin_z", "a_id", "b_id", "threshold", "speed_a", "speed_b",
];

fn snapshot_err(e: impl std::fmt::Display) -> DynError {
    DynError::Snapshot(e.to_string())
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

/// Writes one row per trajectory. Floats use the shortest representation that
/// reads back to the same value.
pub fn write_snapshot<W: Write>(state: &EnsembleState, w: W) -> Result<(), DynError> {
    let mut out = writer(w);
    out.write_record(SNAPSHOT_HEADER).map_err(snapshot_err)?;
    for t in state.trajectories() {
        let p = &t.position;
        let v = &t.velocity;
        out.write_record([
            t.id.to_string(),
            p.x.to_string(),
            p.y.to_string(),
            p.z.to_string(),
            v.x.to_string(),
            v.y.to_string(),
            v.z.to_string(),
            t.ensemble.symbol().to_string(),
            t.spin.symbol().to_string(),
        ])
        .map_err(snapshot_err)?;
    }
    out.flush().map_err(snapshot_err)
}

/// Reads a snapshot written by [`write_snapshot`]; time and step start at 0.
pub fn read_snapshot<R: Read>(r: R, bins: BinGrid) -> Result<EnsembleState, DynError> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers().map_err(snapshot_err)?.clone();
    if header.iter().ne(SNAPSHOT_HEADER) {
        return Err(DynError::Snapshot(format!("unexpected header {header:?}")));
    }
    let mut ts = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(snapshot_err)?;
        let num = |i: usize| -> Result<f64, DynError> { rec[i].parse().map_err(snapshot_err) };
        let ensemble = match &rec[7] {
            "A" => Ensemble::A,
            "B" => Ensemble::B,
            other => return Err(DynError::Snapshot(format!("unknown ensemble {other:?}"))),
        };
        let spin = match &rec[8] {
            s if s == Spin::Up.symbol() => Spin::Up,
            s if s == Spin::Down.symbol() => Spin::Down,
            other => return Err(DynError::Snapshot(format!("unknown spin {other:?}"))),
        };
        ts.push(Trajectory {
            id: rec[0].parse().map_err(snapshot_err)?,
            position: Vector3::new(num(1)?, num(2)?, num(3)?),
            velocity: Vector3::new(num(4)?, num(5)?, num(6)?),
            ensemble,
            spin,
        });
    }
    EnsembleState::new(ts, bins)
}

pub fn write_diagnostics<W: Write>(diag: &[StepDiagnostics], w: W) -> Result<(), DynError> {
    let mut out = writer(w);
    out.write_record(DIAGNOSTICS_HEADER).map_err(snapshot_err)?;
    for d in diag {
        out.write_record([
            d.step.to_string(),
            d.time.to_string(),
            d.mean_speed_a.to_string(),
            d.mean_speed_b.to_string(),
            d.bin_gap_before.to_string(),
            d.bin_gap_after.to_string(),
            d.swaps.to_string(),
            d.capped.to_string(),
        ])
        .map_err(snapshot_err)?;
    }
    out.flush().map_err(snapshot_err)
}

pub fn write_swap_log<W: Write>(log: &[SwapRecord], w: W) -> Result<(), DynError> {
    let mut out = writer(w);
    out.write_record(SWAP_HEADER).map_err(snapshot_err)?;
    for s in log {
        out.write_record([
            s.step.to_string(),
            s.time.to_string(),
            s.bin[0].to_string(),
            s.bin[1].to_string(),
            s.bin[2].to_string(),
            s.a_id.to_string(),
            s.b_id.to_string(),
            s.threshold.to_string(),
            s.speed_a.to_string(),
            s.speed_b.to_string(),
        ])
        .map_err(snapshot_err)?;
    }
    out.flush().map_err(snapshot_err)
}
