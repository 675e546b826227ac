//! Shared helpers for the acceptance suite.

use std::sync::Mutex;

use rand::Rng;
use siavqe::statevector::State;

static OUTPUT: Mutex<()> = Mutex::new(());

/// Prints the one-line verdict for a criterion and returns whether it passed.
pub fn verdict(id: u32, title: &str, pass: bool, detail: &str) -> bool {
    let _guard = OUTPUT.lock().unwrap_or_else(|e| e.into_inner());
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("{tag} [{id:02}] {title}: {detail}");
    pass
}

/// Random real state with amplitudes drawn uniformly before normalizing.
pub fn random_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> State {
    State::from_amplitudes((0..1 << n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .expect("nonzero amplitudes")
}

/// Ordered pair of distinct qubits.
pub fn random_pair<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (usize, usize) {
    let i = rng.random_range(0..n);
    let j = (i + rng.random_range(1..n)) % n;
    (i, j)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) }
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
