use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpTiming {
    pub name: String,
    pub reps: usize,
    pub mean_us: f64,
    pub p50_us: f64,
    pub p95_us: f64,
}

impl OpTiming {
    /// Nearest-rank percentiles over the samples.
    pub fn from_samples(name: &str, samples_us: &[f64]) -> Self {
        assert!(!samples_us.is_empty());
        let mut s = samples_us.to_vec();
        s.sort_by(f64::total_cmp);
        let rank = |p: f64| s[((p * s.len() as f64).ceil() as usize).clamp(1, s.len()) - 1];
        Self {
            name: name.to_string(),
            reps: s.len(),
            mean_us: s.iter().sum::<f64>() / s.len() as f64,
            p50_us: rank(0.5),
            p95_us: rank(0.95),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub scheme: String,
    pub profile: String,
    pub n: usize,
    pub levels: usize,
    pub q_bits: u32,
    pub seed: u64,
    pub ops: Vec<OpTiming>,
}

impl BenchReport {
    pub fn table(&self) -> String {
        let mut out = format!(
            "{} {} n={} L={} logQ={} seed={}\n{:<26}{:>6}{:>14}{:>14}{:>14}\n",
            self.scheme, self.profile, self.n, self.levels, self.q_bits, self.seed, "operator", "reps", "mean us", "p50 us", "p95 us"
        );
        for o in &self.ops {
            out += &format!("{:<26}{:>6}{:>14.1}{:>14.1}{:>14.1}\n", o.name, o.reps, o.mean_us, o.p50_us, o.p95_us);
        }
        out
    }
}

pub fn write_json<T: Serialize>(path: &std::path::Path, value: &T) -> anyhow::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}
