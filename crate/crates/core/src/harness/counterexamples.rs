//! Fixed probes at which a distance to collapse grows along the flow.

use std::fmt;

use serde::Serialize;

use crate::error::Result;
use crate::metrics::{metric_time_derivatives, MetricRates, LOG_RATIO_PROBE_K16};
use crate::reduced::{ReducedModel, SingularState};

#[derive(Clone, Debug, Serialize)]
pub struct ProbeResult {
    pub name: &'static str,
    pub k: usize,
    pub probe: Vec<f64>,
    pub value: f64,
    pub expected: String,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CounterexampleReport {
    pub probes: Vec<ProbeResult>,
    pub passed: usize,
    pub all_pass: bool,
}

struct Probe {
    name: &'static str,
    k: usize,
    a: Vec<f64>,
    pick: fn(&MetricRates) -> f64,
    expected: String,
    lower: f64,
    upper: f64,
}

fn within(target: f64, rel: f64) -> (f64, f64) {
    (target * (1.0 - rel), target * (1.0 + rel))
}

fn probes() -> Vec<Probe> {
    let (m_lo, m_hi) = within(7.3e-4, 0.1);
    let (kl_lo, kl_hi) = within(0.0037, 0.1);
    let (f_lo, f_hi) = within(0.088, 0.1);
    vec![
        Probe {
            name: "dM/dt",
            k: 8,
            a: vec![1.0, 1.0, 1.0, 1.25, 0.01, 0.01, 0.01],
            pick: |r| r.m,
            expected: "7.3e-4 ± 10%".into(),
            lower: m_lo,
            upper: m_hi,
        },
        Probe {
            name: "dKL_reverse/dt",
            k: 8,
            a: vec![1.0, 1.0, 1.0, 1.25, 1e-4, 1e-4, 1e-4],
            pick: |r| r.kl_reverse,
            expected: "0.0037 ± 10%".into(),
            lower: kl_lo,
            upper: kl_hi,
        },
        Probe {
            name: "frobenius raw sum",
            k: 8,
            a: vec![1.0, 1.0, 1.0, 1.25, 1e-4, 1e-4, 1e-4],
            pick: |r| r.frob_raw,
            expected: "0.088 ± 10%".into(),
            lower: f_lo,
            upper: f_hi,
        },
        Probe {
            name: "dM_LR/dt",
            k: 16,
            a: LOG_RATIO_PROBE_K16.to_vec(),
            pick: |r| r.log_ratio,
            expected: "positive, in [1e-14, 1e-12]".into(),
            lower: 1e-14,
            upper: 1e-12,
        },
    ]
}

pub fn check_counterexamples() -> Result<CounterexampleReport> {
    let mut out = Vec::new();
    for p in probes() {
        let model = ReducedModel::new(p.k)?;
        let rates = metric_time_derivatives(&model, &SingularState::new(p.a.clone())?)?;
        let value = (p.pick)(&rates);
        out.push(ProbeResult {
            name: p.name,
            k: p.k,
            probe: p.a,
            value,
            expected: p.expected,
            lower: p.lower,
            upper: p.upper,
            pass: value >= p.lower && value <= p.upper,
        });
    }
    let passed = out.iter().filter(|p| p.pass).count();
    Ok(CounterexampleReport {
        all_pass: passed == out.len(),
        passed,
        probes: out,
    })
}

impl fmt::Display for CounterexampleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.probes {
            writeln!(
                f,
                "{:<20} K={:<3} value={:<12.6e} expected {:<28} {}",
                p.name,
                p.k,
                p.value,
                p.expected,
                if p.pass { "PASS" } else { "FAIL" }
            )?;
            let probe: Vec<String> = p.probe.iter().map(|x| x.to_string()).collect();
            writeln!(f, "    a = ({})", probe.join(", "))?;
        }
        write!(f, "{}/{} probes pass", self.passed, self.probes.len())
    }
}
