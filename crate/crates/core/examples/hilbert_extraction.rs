//! Instantaneous phase and amplitude of a raw signal through the analytic
//! signal. Reads a CSV (`t,<channel>,...`) if given, else a synthetic one.

use std::f64::consts::PI;

use pharec::io::read_signal_csv;
use pharec::signal::{extract_phase_amplitude, RawSignal};

fn main() -> pharec::Result<()> {
    let signals = match std::env::args().nth(1) {
        Some(path) => read_signal_csv(path.as_ref())?,
        None => {
            let t: Vec<f64> = (0..4000).map(|k| k as f64 * 0.005).collect();
            let x = t
                .iter()
                .map(|&s| (1.0 + 0.3 * (0.5 * PI * s).sin()) * (6.0 * PI * s).cos())
                .collect();
            vec![RawSignal::new("x", t, x)?]
        }
    };
    for s in &signals {
        let pa = extract_phase_amplitude(s)?;
        let inner: Vec<usize> = pa.interior().collect();
        let span = pa.theta[inner[inner.len() - 1]] - pa.theta[inner[0]];
        let dt = pa.times[inner[inner.len() - 1]] - pa.times[inner[0]];
        let (lo, hi) = inner.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &k| {
            (lo.min(pa.r[k]), hi.max(pa.r[k]))
        });
        println!(
            "{}: mean frequency {:.4} Hz, amplitude {:.3}..{:.3}, {} interior samples",
            s.label,
            span / dt / (2.0 * PI),
            lo,
            hi,
            inner.len()
        );
    }
    Ok(())
}
