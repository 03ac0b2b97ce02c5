//! Benchmark sequence generators.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest accepted sequence length.
pub const MIN_LENGTH: usize = 10;

const NARMA_LIMIT: f64 = 1e6;

/// Which benchmark to generate, with its task parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// Recall `s_{k-d}`; capacity is scored over delays `0..=d`.
    Memory(usize),
    /// `y = s^n` on an ordered grid.
    Monomial(u32),
    /// `y = sum_{n=1}^{N} (-1)^n s^n` on an ordered grid.
    Polynomial(u32),
    /// `y_k = s_k xor s_{k-d}` on random bits.
    Xor(usize),
    /// NARMA recurrence of order N.
    Narma(usize),
    /// Mackey-Glass forecast `t_f` samples ahead.
    MackeyGlass(usize),
}

impl TaskKind {
    /// Short name used in file names and sweep tables.
    pub fn family(&self) -> &'static str {
        match self {
            TaskKind::Memory(_) => "memory",
            TaskKind::Monomial(_) => "monomial",
            TaskKind::Polynomial(_) => "polynomial",
            TaskKind::Xor(_) => "xor",
            TaskKind::Narma(_) => "narma",
            TaskKind::MackeyGlass(_) => "mackey_glass",
        }
    }

    /// The task's integer parameter (delay, degree, order or horizon).
    pub fn parameter(&self) -> usize {
        match *self {
            TaskKind::Memory(d) | TaskKind::Xor(d) | TaskKind::Narma(d) => d,
            TaskKind::MackeyGlass(t) => t,
            TaskKind::Monomial(n) | TaskKind::Polynomial(n) => n as usize,
        }
    }

    /// Same family with a different parameter.
    pub fn with_parameter(&self, p: usize) -> Self {
        match self {
            TaskKind::Memory(_) => TaskKind::Memory(p),
            TaskKind::Monomial(_) => TaskKind::Monomial(p as u32),
            TaskKind::Polynomial(_) => TaskKind::Polynomial(p as u32),
            TaskKind::Xor(_) => TaskKind::Xor(p),
            TaskKind::Narma(_) => TaskKind::Narma(p),
            TaskKind::MackeyGlass(_) => TaskKind::MackeyGlass(p),
        }
    }

    pub fn is_binary(&self) -> bool {
        matches!(self, TaskKind::Xor(_))
    }
}

/// NARMA recurrence constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NarmaParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    /// Input offset: `u = mu + nu * s`.
    pub mu: f64,
    pub nu: f64,
}

impl Default for NarmaParams {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            beta: 0.05,
            gamma: 50.0,
            delta: 0.1,
            mu: 0.0,
            nu: 0.2,
        }
    }
}

/// Mackey-Glass equation constants and integrator settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MackeyGlassParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub tau: f64,
    /// RK4 step.
    pub h: f64,
    /// Constant history on `[-tau, 0]`.
    pub history: f64,
    /// Integrated time discarded before sampling.
    pub transient: f64,
    /// Integrated time between consecutive samples.
    pub sample_interval: f64,
}

impl Default for MackeyGlassParams {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            beta: 10.0,
            gamma: 0.1,
            tau: 17.0,
            h: 0.1,
            history: 1.2,
            transient: 170.0,
            sample_interval: 1.0,
        }
    }
}

fn steps_of(span: f64, h: f64, what: &str) -> Result<usize> {
    let ratio = span / h;
    let n = ratio.round();
    if !(ratio.is_finite() && n >= 0.0 && (ratio - n).abs() <= 1e-9 * ratio.max(1.0)) {
        return Err(Error::Config(format!(
            "{what} = {span} is not an integer multiple of h = {h}"
        )));
    }
    Ok(n as usize)
}

impl MackeyGlassParams {
    fn validate(&self) -> Result<(usize, usize, usize)> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::Config(format!("integration step h must be > 0, got {}", self.h)));
        }
        let lag = steps_of(self.tau, self.h, "tau")?;
        if lag == 0 {
            return Err(Error::Config("tau must be positive".into()));
        }
        let transient = steps_of(self.transient, self.h, "transient")?;
        let stride = steps_of(self.sample_interval, self.h, "sample_interval")?;
        if stride == 0 {
            return Err(Error::Config("sample_interval must be positive".into()));
        }
        Ok((lag, transient, stride))
    }

    fn rhs(&self, s: f64, delayed: f64) -> f64 {
        self.alpha * delayed / (1.0 + delayed.powf(self.beta)) - self.gamma * s
    }
}

/// Generator configuration for one benchmark sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub kind: TaskKind,
    /// Total sequence length K.
    pub length: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub narma: NarmaParams,
    #[serde(default)]
    pub mackey_glass: MackeyGlassParams,
    /// Jointly permute (input, target) pairs; a control for temporal structure.
    #[serde(default)]
    pub shuffle: bool,
}

impl TaskSpec {
    pub fn new(kind: TaskKind, length: usize, seed: u64) -> Self {
        Self {
            kind,
            length,
            seed,
            narma: NarmaParams::default(),
            mackey_glass: MackeyGlassParams::default(),
            shuffle: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.length < MIN_LENGTH {
            return Err(Error::Config(format!(
                "task length {} below minimum {MIN_LENGTH}",
                self.length
            )));
        }
        let k = self.length;
        match self.kind {
            TaskKind::Memory(d) if d >= k => {
                Err(Error::Config(format!("memory delay {d} must be < length {k}")))
            }
            TaskKind::Xor(d) if d == 0 || d >= k => {
                Err(Error::Config(format!("xor delay {d} must lie in [1, {k})")))
            }
            TaskKind::Monomial(0) | TaskKind::Polynomial(0) => {
                Err(Error::Config("degree must be >= 1".into()))
            }
            TaskKind::Narma(n) if n == 0 || n >= k => {
                Err(Error::Config(format!("NARMA order {n} must lie in [1, {k})")))
            }
            TaskKind::MackeyGlass(_) => self.mackey_glass.validate().map(|_| ()),
            _ => Ok(()),
        }
    }
}

/// Input/target sequences of one benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    /// First index whose target is defined; earlier targets are filled with 0.
    pub valid_from: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// `s_{k-d}` for `k >= d`, 0 before.
    pub fn delayed_input(&self, d: usize) -> Vec<f64> {
        (0..self.len())
            .map(|k| if k >= d { self.inputs[k - d] } else { 0.0 })
            .collect()
    }

    /// CSV with columns `k,s,y`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,s,y\n");
        for (k, (s, y)) in self.inputs.iter().zip(&self.targets).enumerate() {
            out.push_str(&format!("{k},{s:.16e},{y:.16e}\n"));
        }
        out
    }
}

fn uniform_inputs(k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..k).map(|_| rng.random::<f64>()).collect()
}

/// Ordered equispaced grid `k / (K - 1)`.
pub fn ordered_grid(k: usize) -> Vec<f64> {
    let last = (k.max(2) - 1) as f64;
    (0..k).map(|i| i as f64 / last).collect()
}

/// Linear memory task: uniform inputs, `y_k = s_{k-d}`.
pub fn gen_memory(k: usize, d: usize, seed: u64) -> Result<Dataset> {
    if d >= k {
        return Err(Error::Config(format!("memory delay {d} must be < length {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = uniform_inputs(k, &mut rng);
    let mut ds = Dataset {
        targets: Vec::new(),
        inputs,
        valid_from: d,
    };
    ds.targets = ds.delayed_input(d);
    Ok(ds)
}

/// `y = s^n` on the ordered grid.
pub fn gen_monomial(k: usize, n: u32) -> Result<Dataset> {
    if k < 2 || n == 0 {
        return Err(Error::Config(format!("monomial needs K >= 2 and n >= 1, got K={k}, n={n}")));
    }
    let inputs = ordered_grid(k);
    let targets = inputs.iter().map(|s| s.powi(n as i32)).collect();
    Ok(Dataset {
        inputs,
        targets,
        valid_from: 0,
    })
}

/// `y = sum_{j=1}^{N} (-1)^j s^j` on the ordered grid.
pub fn gen_polynomial(k: usize, n: u32) -> Result<Dataset> {
    if k < 2 || n == 0 {
        return Err(Error::Config(format!("polynomial needs K >= 2 and N >= 1, got K={k}, N={n}")));
    }
    let inputs = ordered_grid(k);
    let targets = inputs
        .iter()
        .map(|&s| {
            (1..=n as i32)
                .map(|j| if j % 2 == 0 { s.powi(j) } else { -s.powi(j) })
                .sum()
        })
        .collect();
    Ok(Dataset {
        inputs,
        targets,
        valid_from: 0,
    })
}

/// Temporal XOR on fair random bits.
pub fn gen_xor(k: usize, d: usize, seed: u64) -> Result<Dataset> {
    if d == 0 || d >= k {
        return Err(Error::Config(format!("xor delay {d} must lie in [1, {k})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits: Vec<u8> = (0..k).map(|_| rng.random_range(0..=1u8)).collect();
    let targets = (0..k)
        .map(|i| if i >= d { (bits[i] ^ bits[i - d]) as f64 } else { 0.0 })
        .collect();
    Ok(Dataset {
        inputs: bits.into_iter().map(f64::from).collect(),
        targets,
        valid_from: d,
    })
}

/// NARMA-N targets for a given input sequence.
///
/// History `y_j = 0` for `j < N`; returns a divergence error once `|y|` exceeds 1e6.
pub fn narma_targets(inputs: &[f64], order: usize, p: &NarmaParams) -> Result<Vec<f64>> {
    let k = inputs.len();
    let mut y = vec![0.0; k];
    let mut window: f64 = 0.0; // sum of y_{i-N..i}
    for i in order..k {
        let u = p.mu + p.nu * inputs[i - 1];
        let prev = y[i - 1];
        let next = p.alpha * prev + p.beta * prev * window + p.gamma * (u.powi(3) + u.powi(5)) + p.delta;
        if !next.is_finite() || next.abs() > NARMA_LIMIT {
            return Err(Error::Divergence {
                step: i,
                value: next,
            });
        }
        y[i] = next;
        window += next - y[i - order];
    }
    Ok(y)
}

/// NARMA-N on uniform inputs.
pub fn gen_narma(k: usize, order: usize, seed: u64, p: &NarmaParams) -> Result<Dataset> {
    if order == 0 || order >= k {
        return Err(Error::Config(format!("NARMA order {order} must lie in [1, {k})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = uniform_inputs(k, &mut rng);
    let targets = narma_targets(&inputs, order, p)?;
    Ok(Dataset {
        inputs,
        targets,
        valid_from: order,
    })
}

/// Raw Mackey-Glass trajectory sampled every `sample_interval`, starting right after the transient.
pub fn integrate_mackey_glass(samples: usize, p: &MackeyGlassParams) -> Result<Vec<f64>> {
    let (lag, transient, stride) = p.validate()?;
    let h = p.h;
    // Ring buffers of the last `lag + 1` grid values and derivatives.
    let cap = lag + 1;
    let mut s_buf = vec![p.history; cap];
    let mut f_buf = vec![0.0; cap];
    let mut head = lag;
    f_buf[head] = p.rhs(p.history, p.history);

    let total = transient + samples.saturating_sub(1) * stride + 1;
    let mut out = Vec::with_capacity(samples);
    let mut s = p.history;
    for n in 0..total {
        if n >= transient && (n - transient) % stride == 0 {
            out.push(s);
            if out.len() == samples {
                break;
            }
        }
        // delayed grid points t_n - tau and t_n - tau + h
        let i0 = (head + cap - lag) % cap;
        let i1 = (i0 + 1) % cap;
        let (d0, d1) = (s_buf[i0], s_buf[i1]);
        // The history is flat, so slopes at or before t = 0 seen from the left are zero.
        let j0 = n as isize - lag as isize;
        let (g0, g1) = if j0 < 0 { (0.0, 0.0) } else { (f_buf[i0], f_buf[i1]) };
        let mid = 0.5 * (d0 + d1) + h / 8.0 * (g0 - g1);
        let k1 = p.rhs(s, d0);
        let k2 = p.rhs(s + 0.5 * h * k1, mid);
        let k3 = p.rhs(s + 0.5 * h * k2, mid);
        let k4 = p.rhs(s + h * k3, d1);
        s += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !s.is_finite() {
            return Err(Error::Divergence { step: n, value: s });
        }
        head = (head + 1) % cap;
        s_buf[head] = s;
        let delayed_next = s_buf[(head + cap - lag) % cap];
        f_buf[head] = p.rhs(s, delayed_next);
    }
    Ok(out)
}

/// Mackey-Glass forecasting: min-max normalised series, `y_k = s_{k+t_f}`.
///
/// `K + t_f` samples are integrated so that every one of the `K` targets is defined.
pub fn gen_mackey_glass(k: usize, horizon: usize, p: &MackeyGlassParams) -> Result<Dataset> {
    let raw = integrate_mackey_glass(k + horizon, p)?;
    let series = crate::readout::min_max_normalize(&raw);
    Ok(Dataset {
        inputs: series[..k].to_vec(),
        targets: series[horizon..horizon + k].to_vec(),
        valid_from: 0,
    })
}

/// Jointly permutes the defined (input, target) pairs; the undefined prefix is dropped.
pub fn shuffle_dataset(ds: &Dataset, seed: u64) -> Dataset {
    let mut order: Vec<usize> = (ds.valid_from..ds.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    order.shuffle(&mut rng);
    Dataset {
        inputs: order.iter().map(|&i| ds.inputs[i]).collect(),
        targets: order.iter().map(|&i| ds.targets[i]).collect(),
        valid_from: 0,
    }
}

/// Generates the dataset described by `spec`.
pub fn generate(spec: &TaskSpec) -> Result<Dataset> {
    spec.validate()?;
    let k = spec.length;
    let ds = match spec.kind {
        TaskKind::Memory(d) => gen_memory(k, d, spec.seed)?,
        TaskKind::Monomial(n) => gen_monomial(k, n)?,
        TaskKind::Polynomial(n) => gen_polynomial(k, n)?,
        TaskKind::Xor(d) => gen_xor(k, d, spec.seed)?,
        TaskKind::Narma(n) => gen_narma(k, n, spec.seed, &spec.narma)?,
        TaskKind::MackeyGlass(t) => gen_mackey_glass(k, t, &spec.mackey_glass)?,
    };
    Ok(if spec.shuffle {
        shuffle_dataset(&ds, spec.seed)
    } else {
        ds
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn memory_shift() {
        let ds = gen_memory(20, 0, 1).unwrap();
        assert_eq!(ds.inputs, ds.targets);
        let ds = gen_memory(20, 2, 1).unwrap();
        assert_eq!(ds.valid_from, 2);
        assert_eq!(&ds.targets[2..5], &ds.inputs[0..3]);
        assert!(gen_memory(10, 10, 1).is_err());
    }

    #[test]
    fn monomial_and_polynomial() {
        let ds = gen_monomial(11, 1).unwrap();
        assert_eq!(ds.inputs, ds.targets);
        assert_eq!(ds.inputs[0], 0.0);
        assert_eq!(ds.inputs[10], 1.0);
        let ds = gen_polynomial(11, 2).unwrap();
        assert_eq!(ds.targets[10], 0.0);
        assert!((ds.targets[5] - (-0.5 + 0.25)).abs() < 1e-15);
        let ds = gen_polynomial(11, 3).unwrap();
        assert!((ds.targets[10] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn xor_truth_table() {
        let ds = gen_xor(200, 1, 5).unwrap();
        for k in 1..200 {
            let expect = (ds.inputs[k] != ds.inputs[k - 1]) as u8 as f64;
            assert_eq!(ds.targets[k], expect);
        }
        assert!(ds.inputs.iter().all(|&b| b == 0.0 || b == 1.0));
        let ds = gen_xor(10, 9, 5).unwrap();
        assert_eq!(ds.len() - ds.valid_from, 1);
        assert!(gen_xor(10, 0, 5).is_err());
    }

    #[test]
    fn narma_first_valid_step() {
        let p = NarmaParams::default();
        let ds = gen_narma(50, 3, 11, &p).unwrap();
        let u = 0.2 * ds.inputs[2];
        assert!((ds.targets[3] - (50.0 * (u.powi(3) + u.powi(5)) + 0.1)).abs() < 1e-15);
        assert_eq!(&ds.targets[..3], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn narma_divergence_is_reported() {
        let p = NarmaParams {
            beta: 5.0,
            ..NarmaParams::default()
        };
        let err = narma_targets(&[1.0; 200], 2, &p).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }

    #[test]
    fn mackey_glass_equilibrium() {
        let p = MackeyGlassParams {
            history: 1.0,
            transient: 0.0,
            sample_interval: 0.1,
            ..MackeyGlassParams::default()
        };
        let traj = integrate_mackey_glass(101, &p).unwrap();
        assert!(traj.iter().all(|s| (s - 1.0).abs() < 1e-9));
    }

    #[test]
    fn mackey_glass_rejects_fractional_lag() {
        let p = MackeyGlassParams {
            h: 0.3,
            ..MackeyGlassParams::default()
        };
        assert!(matches!(
            integrate_mackey_glass(10, &p),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn mackey_glass_horizon_zero() {
        let ds = gen_mackey_glass(100, 0, &MackeyGlassParams::default()).unwrap();
        assert_eq!(ds.inputs, ds.targets);
        assert!(ds.inputs.iter().all(|s| (0.0..=1.0).contains(s)));
        let ds3 = gen_mackey_glass(100, 3, &MackeyGlassParams::default()).unwrap();
        assert_eq!(ds3.len(), 100);
        assert_eq!(&ds3.targets[..97], &ds3.inputs[3..]);
    }

    #[test]
    fn shuffle_keeps_pairs() {
        let ds = gen_memory(30, 2, 3).unwrap();
        let sh = shuffle_dataset(&ds, 9);
        assert_eq!(sh.len(), 28);
        let mut a: Vec<(u64, u64)> = (2..30)
            .map(|i| (ds.inputs[i].to_bits(), ds.targets[i].to_bits()))
            .collect();
        let mut b: Vec<(u64, u64)> = sh
            .inputs
            .iter()
            .zip(&sh.targets)
            .map(|(s, y)| (s.to_bits(), y.to_bits()))
            .collect();
        assert_ne!(a, b);
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn task_kind_serde() {
        let spec: TaskSpec =
            serde_json::from_str(r#"{"kind": {"narma": 5}, "length": 500, "seed": 2}"#).unwrap();
        assert_eq!(spec.kind, TaskKind::Narma(5));
        assert_eq!(spec.narma, NarmaParams::default());
        assert!(serde_json::from_str::<TaskSpec>(r#"{"kind": {"narma": 5}, "length": 500, "bogus": 1}"#).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(TaskSpec::new(TaskKind::Memory(1), 9, 0).validate().is_err());
        assert!(TaskSpec::new(TaskKind::Monomial(0), 50, 0).validate().is_err());
        assert!(TaskSpec::new(TaskKind::Narma(5), 50, 0).validate().is_ok());
    }
}
