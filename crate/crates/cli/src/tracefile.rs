//! Trace CSV: one row per time step, floats in 17-digit scientific notation
//! so a written trace reads back bit for bit.
//!
//! Header: `t,y,u,ystar,w,wbar,e,eps,rho,nu,V,thetahat_0,..`.

use std::path::Path;

use dstep_core::controller::{SimulationTrace, TraceRecord};
use dstep_core::model::InitialCondition;
use nalgebra::DVector;

use crate::error::{CliError, Result};

const FIXED: [&str; 11] = [
    "t", "y", "u", "ystar", "w", "wbar", "e", "eps", "rho", "nu", "V",
];

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn header(dim: usize) -> Vec<String> {
    FIXED
        .iter()
        .map(|s| s.to_string())
        .chain((0..dim).map(|i| format!("thetahat_{i}")))
        .collect()
}

pub fn write_trace<W: std::io::Write>(trace: &SimulationTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let map = |e: csv::Error| CliError::Trace(e.to_string());
    w.write_record(header(trace.dim())).map_err(map)?;
    for r in trace.records() {
        let mut row = vec![
            r.t.to_string(),
            fmt_f(r.y),
            fmt_f(r.u),
            fmt_f(r.ystar),
            fmt_f(r.w),
            fmt_f(r.wbar),
            fmt_f(r.e),
            fmt_f(r.eps),
            r.rho.to_string(),
            fmt_f(r.nu),
            fmt_f(r.v),
        ];
        row.extend(r.theta_hat.iter().map(|x| fmt_f(*x)));
        w.write_record(&row).map_err(map)?;
    }
    w.flush().map_err(|e| CliError::Trace(e.to_string()))?;
    Ok(())
}

pub fn save_trace(trace: &SimulationTrace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    write_trace(trace, std::io::BufWriter::new(file))
}

/// Reads rows back into a trace. The CSV does not carry the initial history
/// or `theta_hat(t0-1)`, so the caller supplies them (normally from the
/// resolved experiment config).
pub fn read_trace<R: std::io::Read>(
    input: R,
    orders: (usize, usize, usize),
    x0: InitialCondition,
    theta0: DVector<f64>,
) -> Result<SimulationTrace> {
    let (n, m, d) = orders;
    let dim = n + m + d;
    let mut rdr = csv::Reader::from_reader(input);
    let head: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Trace(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if head != header(dim) {
        return Err(CliError::Trace(format!(
            "unexpected header: expected {} columns ending in thetahat_{}, got {:?}",
            FIXED.len() + dim,
            dim.saturating_sub(1),
            head
        )));
    }
    let mut records = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Trace(e.to_string()))?;
        let bad = |col: usize, v: &str| {
            CliError::Trace(format!(
                "row {}: bad value {v:?} in column {}",
                line + 1,
                head[col]
            ))
        };
        let f = |col: usize| -> Result<f64> {
            let v = &rec[col];
            v.trim().parse::<f64>().map_err(|_| bad(col, v))
        };
        let t: i64 = rec[0].trim().parse().map_err(|_| bad(0, &rec[0]))?;
        let rho: u8 = match rec[8].trim() {
            "0" => 0,
            "1" => 1,
            v => return Err(bad(8, v)),
        };
        let theta_hat = (0..dim)
            .map(|i| f(FIXED.len() + i))
            .collect::<Result<Vec<_>>>()?;
        records.push(TraceRecord {
            t,
            y: f(1)?,
            u: f(2)?,
            ystar: f(3)?,
            w: f(4)?,
            wbar: f(5)?,
            e: f(6)?,
            eps: f(7)?,
            rho,
            nu: f(9)?,
            v: f(10)?,
            theta_hat: DVector::from_vec(theta_hat),
        });
    }
    let t0 = records
        .first()
        .map(|r| r.t)
        .ok_or_else(|| CliError::Trace("trace has no rows".into()))?;
    Ok(SimulationTrace::new(orders, t0, x0, theta0, records)?)
}

pub fn load_trace(
    path: impl AsRef<Path>,
    orders: (usize, usize, usize),
    x0: InitialCondition,
    theta0: DVector<f64>,
) -> Result<SimulationTrace> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_trace(std::io::BufReader::new(file), orders, x0, theta0)
}
