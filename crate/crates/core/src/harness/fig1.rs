//! The K = 8 reduced trajectory on which `M` rises while the forward KL
//! keeps falling.

use std::fs;
use std::path::Path;

use super::svg::{LinePlot, Series};
use crate::error::{Error, Result};
use crate::metrics::nc_distances;
use crate::reduced::{integrate_with, CeField, Euler, ReducedModel, SingularState};
use crate::schedule::Schedule;

pub const FIG1_INIT: [f64; 7] = [1.0, 1.0, 1.0, 1.0, 1e-3, 1e-3, 1e-3];
pub const FIG1_DT: f64 = 0.01;
pub const FIG1_HORIZON: f64 = 1e4;
const FIG1_LOG_POINTS: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct Fig1Row {
    pub t: f64,
    pub a_hat: Vec<f64>,
    pub kl_forward: f64,
    pub m: f64,
}

/// Integrates with explicit Euler and logs the initial point plus a
/// geometric schedule over the steps.
pub fn fig1_trajectory() -> Result<Vec<Fig1Row>> {
    let model = ReducedModel::new(8)?;
    let steps = (FIG1_HORIZON / FIG1_DT).round() as usize;
    let schedule = Schedule::geometric(steps, FIG1_LOG_POINTS)?;
    let points = integrate_with(&model, &CeField, &Euler, &FIG1_INIT, FIG1_DT, steps, &schedule)?;
    std::iter::once((0.0, FIG1_INIT.to_vec()))
        .chain(points.into_iter().map(|p| (p.t, p.a)))
        .map(|(t, a)| {
            let s = SingularState::new(a)?;
            let d = nc_distances(&s);
            Ok(Fig1Row {
                t,
                a_hat: s.a_hat(),
                kl_forward: d.kl_forward,
                m: d.m,
            })
        })
        .collect()
}

/// Writes `fig1.csv` and the three panels into `dir`.
pub fn reproduce_fig1(dir: &Path) -> Result<Vec<Fig1Row>> {
    let rows = fig1_trajectory()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("fig1.csv");
    let mut w = csv::Writer::from_path(&path)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=7).map(|i| format!("a_hat_{i}")));
    header.push("kl_forward".into());
    header.push("M".into());
    w.write_record(&header)?;
    for r in &rows {
        let mut rec = vec![r.t.to_string()];
        rec.extend(r.a_hat.iter().map(|x| x.to_string()));
        rec.push(r.kl_forward.to_string());
        rec.push(r.m.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    // the log-scaled time axis drops the t = 0 row
    let shares = (0..7)
        .map(|i| Series::new(format!("â{}", i + 1), rows.iter().map(|r| (r.t, r.a_hat[i])).collect()))
        .collect();
    let panels = [
        ("fig1_shares", "Normalized singular values", "â", shares),
        (
            "fig1_kl",
            "Forward KL to uniform",
            "KL",
            vec![Series::new("KL", rows.iter().map(|r| (r.t, r.kl_forward)).collect())],
        ),
        (
            "fig1_m",
            "Squared distance M",
            "M",
            vec![Series::new("M", rows.iter().map(|r| (r.t, r.m)).collect())],
        ),
    ];
    for (stem, title, y, series) in panels {
        let plot = LinePlot {
            title: title.into(),
            x_label: "t".into(),
            y_label: y.into(),
            log_x: true,
            log_y: false,
            series,
        };
        let path = dir.join(format!("{stem}.svg"));
        fs::write(&path, plot.render()).map_err(|e| Error::io(&path, e))?;
    }
    Ok(rows)
}
