//! Time-series ingestion, scaling, and k-medoids reduction into a weighted
//! scenario set of net injections.

use std::collections::BTreeMap;
use std::io::Read;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{BusKind, Network};

/// One time step of per-bus renewable generation and load, per-unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub label: String,
    pub p_r: Vec<f64>,
    pub q_r: Vec<f64>,
    pub p_d: Vec<f64>,
    pub q_d: Vec<f64>,
}

impl Sample {
    pub fn zeros(label: &str, n: usize) -> Self {
        Self {
            label: label.to_string(),
            p_r: vec![0.0; n],
            q_r: vec![0.0; n],
            p_d: vec![0.0; n],
            q_d: vec![0.0; n],
        }
    }
}

/// Weighted scenario set; probabilities sum to one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub scenarios: Vec<Sample>,
    pub pi: Vec<f64>,
}

impl ScenarioSet {
    pub fn new(scenarios: Vec<Sample>, pi: Vec<f64>) -> Result<Self> {
        let set = Self { scenarios, pi };
        set.validate()?;
        Ok(set)
    }

    pub fn single(sample: Sample) -> Self {
        Self {
            scenarios: vec![sample],
            pi: vec![1.0],
        }
    }

    pub fn uniform(scenarios: Vec<Sample>) -> Result<Self> {
        let n = scenarios.len();
        if n == 0 {
            return Err(Error::Argument("empty scenario list".into()));
        }
        Self::new(scenarios, vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenarios.len() != self.pi.len() {
            return Err(Error::Dimension(format!(
                "{} scenarios with {} probabilities",
                self.scenarios.len(),
                self.pi.len()
            )));
        }
        if self.pi.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::Argument("scenario probabilities must be positive".into()));
        }
        let total: f64 = self.pi.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Argument(format!(
                "scenario probabilities sum to {total}, expected 1"
            )));
        }
        Ok(())
    }

    pub fn from_file<P: AsRef<std::path::Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let set: ScenarioSet = serde_json::from_str(&text)?;
        set.validate()?;
        Ok(set)
    }
}

/// Net per-bus injections for one sample: `p[i] = p_r[i] - p_d[i]` and
/// `q[i] = q_r[i] - q_d[i]` at non-substation buses, zero at the substation.
#[derive(Debug, Clone)]
pub struct Injections {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

pub fn net_injections(sample: &Sample, net: &Network) -> Result<Injections> {
    let n = net.n_buses();
    if sample.p_r.len() != n || sample.p_d.len() != n || sample.q_r.len() != n || sample.q_d.len() != n {
        return Err(Error::Dimension(format!(
            "sample vectors are not sized to {n} buses"
        )));
    }
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for bus in &net.buses {
        if bus.kind == BusKind::NonSubstation {
            p[bus.id] = sample.p_r[bus.id] - sample.p_d[bus.id];
            q[bus.id] = sample.q_r[bus.id] - sample.q_d[bus.id];
        }
    }
    Ok(Injections { p, q })
}

/// Optional per-bus multiplicative scale factors applied at ingestion.
pub type BusScales = BTreeMap<usize, f64>;

/// Parse hourly CSV data into per-bus samples.
///
/// Header: first column is a timestamp label, remaining columns are named
/// `<busid>:<kind>` with kind `load_p` or `ren_p` (active power, per-unit).
/// Reactive power is derived with a fixed power factor,
/// `q = p * tan(acos(power_factor))`; renewable active power is scaled by
/// `k_r` before the transform.
pub fn ingest_timeseries<R: Read>(
    source: R,
    net: &Network,
    power_factor: f64,
    k_r: f64,
    scales: Option<&BusScales>,
) -> Result<Vec<Sample>> {
    if !(power_factor > 0.0 && power_factor <= 1.0) {
        return Err(Error::Argument(format!(
            "power factor {power_factor} outside (0, 1]"
        )));
    }
    if k_r < 0.0 {
        return Err(Error::Argument("renewable scale k_r must be >= 0".into()));
    }
    let tan_phi = power_factor.acos().tan();
    let n = net.n_buses();
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);

    enum Col {
        LoadP(usize),
        RenP(usize),
    }
    let headers = reader.headers()?.clone();
    let mut columns = Vec::with_capacity(headers.len().saturating_sub(1));
    for name in headers.iter().skip(1) {
        let (bus_str, kind) = name.split_once(':').ok_or_else(|| Error::Ingestion {
            row: 0,
            msg: format!("column '{name}' is not '<busid>:<kind>'"),
        })?;
        let bus: usize = bus_str.trim().parse().map_err(|_| Error::Ingestion {
            row: 0,
            msg: format!("column '{name}' has a non-integer bus id"),
        })?;
        if bus >= n {
            return Err(Error::Ingestion {
                row: 0,
                msg: format!("column '{name}' references bus {bus}, network has {n} buses"),
            });
        }
        match kind.trim() {
            "load_p" => columns.push(Col::LoadP(bus)),
            "ren_p" => columns.push(Col::RenP(bus)),
            other => {
                return Err(Error::Ingestion {
                    row: 0,
                    msg: format!("column '{name}' has unknown kind '{other}'"),
                })
            }
        }
    }

    let scale_of = |bus: usize| scales.and_then(|s| s.get(&bus)).copied().unwrap_or(1.0);
    let mut samples = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record?;
        if record.len() != columns.len() + 1 {
            return Err(Error::Ingestion {
                row,
                msg: format!(
                    "expected {} fields, found {}",
                    columns.len() + 1,
                    record.len()
                ),
            });
        }
        let mut sample = Sample::zeros(record.get(0).unwrap_or(""), n);
        for (col, field) in columns.iter().zip(record.iter().skip(1)) {
            let value: f64 = field.trim().parse().map_err(|_| Error::Ingestion {
                row,
                msg: format!("unparsable value '{field}'"),
            })?;
            if value < 0.0 {
                return Err(Error::Ingestion {
                    row,
                    msg: format!("negative power {value}"),
                });
            }
            match *col {
                Col::LoadP(bus) => {
                    let p = value * scale_of(bus);
                    sample.p_d[bus] += p;
                    sample.q_d[bus] += p * tan_phi;
                }
                Col::RenP(bus) => {
                    let p = value * scale_of(bus) * k_r;
                    sample.p_r[bus] += p;
                    sample.q_r[bus] += p * tan_phi;
                }
            }
        }
        samples.push(sample);
    }
    Ok(samples)
}

/// Clustering feature vector: concatenated active renewable and load powers.
fn features(sample: &Sample) -> Vec<f64> {
    let mut f = sample.p_r.clone();
    f.extend_from_slice(&sample.p_d);
    f
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// PAM k-medoids with greedy BUILD initialization; swap candidates are
/// examined in a seed-controlled order so exact ties break deterministically.
/// Returns medoid sample indices, per-sample assignment, and the objective
/// value after each accepted swap (non-increasing).
pub(crate) fn kmedoids_core(
    dist: &[Vec<f64>],
    k: usize,
    seed: u64,
) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let n = dist.len();
    // BUILD: start with the most central point, then greedily add the point
    // that reduces the total nearest-medoid distance the most.
    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    let first = (0..n)
        .min_by(|&a, &b| {
            let sa: f64 = dist[a].iter().sum();
            let sb: f64 = dist[b].iter().sum();
            sa.partial_cmp(&sb).unwrap().then(a.cmp(&b))
        })
        .unwrap();
    medoids.push(first);
    let mut nearest: Vec<f64> = (0..n).map(|i| dist[i][first]).collect();
    while medoids.len() < k {
        let mut best = (f64::INFINITY, usize::MAX);
        for cand in 0..n {
            if medoids.contains(&cand) {
                continue;
            }
            let gain: f64 = (0..n)
                .map(|i| (nearest[i] - dist[i][cand]).max(0.0))
                .sum();
            if -gain < best.0 || (-gain == best.0 && cand < best.1) {
                best = (-gain, cand);
            }
        }
        let cand = best.1;
        medoids.push(cand);
        for i in 0..n {
            nearest[i] = nearest[i].min(dist[i][cand]);
        }
    }

    let objective = |medoids: &[usize]| -> f64 {
        (0..n)
            .map(|i| {
                medoids
                    .iter()
                    .map(|&m| dist[i][m])
                    .fold(f64::INFINITY, f64::min)
            })
            .sum()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let mut current = objective(&medoids);
    let mut history = vec![current];
    loop {
        let mut best: Option<(f64, usize, usize)> = None; // (objective, slot, candidate)
        for &cand in &order {
            if medoids.contains(&cand) {
                continue;
            }
            for slot in 0..k {
                let mut trial = medoids.clone();
                trial[slot] = cand;
                let obj = objective(&trial);
                if obj + 1e-15 < current && best.map_or(true, |(b, _, _)| obj < b) {
                    best = Some((obj, slot, cand));
                }
            }
        }
        match best {
            Some((obj, slot, cand)) => {
                medoids[slot] = cand;
                current = obj;
                history.push(current);
            }
            None => break,
        }
    }

    medoids.sort_unstable();
    let assignment: Vec<usize> = (0..n)
        .map(|i| {
            (0..k)
                .min_by(|&a, &b| {
                    dist[i][medoids[a]]
                        .partial_cmp(&dist[i][medoids[b]])
                        .unwrap()
                        .then(a.cmp(&b))
                })
                .unwrap()
        })
        .collect();
    (medoids, assignment, history)
}

/// Reduce samples to `k` weighted scenarios: scenario `w` is the medoid of
/// cluster `w` and `pi_w` is the cluster's share of the samples.
pub fn kmedoids_reduce(samples: &[Sample], k: usize, seed: u64) -> Result<ScenarioSet> {
    let n = samples.len();
    if k == 0 || k > n {
        return Err(Error::Argument(format!(
            "k = {k} outside 1..={n} samples"
        )));
    }
    let feats: Vec<Vec<f64>> = samples.iter().map(features).collect();
    let dist: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| euclidean(&feats[i], &feats[j])).collect())
        .collect();
    let (medoids, assignment, _) = kmedoids_core(&dist, k, seed);
    let mut counts = vec![0usize; k];
    for &a in &assignment {
        counts[a] += 1;
    }
    let scenarios: Vec<Sample> = medoids.iter().map(|&m| samples[m].clone()).collect();
    let pi: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    ScenarioSet::new(scenarios, pi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Branch, Bus, Network};
    use approx::assert_relative_eq;

    fn tiny_net(n: usize) -> Network {
        Network {
            base_mva: 10.0,
            buses: (0..n)
                .map(|id| Bus {
                    id,
                    kind: if id == 0 {
                        BusKind::Substation
                    } else {
                        BusKind::NonSubstation
                    },
                    v_min: 0.9,
                    v_max: 1.1,
                    p_min: None,
                    p_max: None,
                    q_min: None,
                    q_max: None,
                })
                .collect(),
            branches: (1..n)
                .map(|i| Branch {
                    id: i - 1,
                    from: i - 1,
                    to: i,
                    g: 1.0,
                    b: -5.0,
                    s_max: 10.0,
                    switchable: true,
                })
                .collect(),
        }
    }

    #[test]
    fn unity_power_factor_gives_zero_reactive() {
        let net = tiny_net(3);
        let csv = "timestamp,1:load_p\n2020-01-01T00:00,1.0\n";
        let samples = ingest_timeseries(csv.as_bytes(), &net, 1.0, 1.0, None).unwrap();
        assert_eq!(samples.len(), 1);
        assert_relative_eq!(samples[0].p_d[1], 1.0);
        assert_relative_eq!(samples[0].q_d[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn power_factor_derives_reactive() {
        let net = tiny_net(3);
        let csv = "timestamp,1:load_p\nt0,0.8\n";
        let samples = ingest_timeseries(csv.as_bytes(), &net, 0.9, 1.0, None).unwrap();
        // independent closed form: q = p * tan(acos(pf))
        let expected = 0.8 * (0.9f64.acos()).tan();
        assert_relative_eq!(samples[0].q_d[1], expected, epsilon = 1e-12);
        assert_relative_eq!(samples[0].q_d[1], 0.3874, epsilon = 1e-4);
    }

    #[test]
    fn renewable_scale_multiplies_active_power() {
        let net = tiny_net(3);
        let csv = "timestamp,2:ren_p\nt0,0.3\n";
        let samples = ingest_timeseries(csv.as_bytes(), &net, 1.0, 2.0, None).unwrap();
        assert_relative_eq!(samples[0].p_r[2], 0.6);
    }

    #[test]
    fn unmapped_bus_is_ingestion_error() {
        let net = tiny_net(3);
        let csv = "timestamp,9:load_p\nt0,0.3\n";
        match ingest_timeseries(csv.as_bytes(), &net, 1.0, 1.0, None) {
            Err(Error::Ingestion { row: 0, .. }) => {}
            other => panic!("expected ingestion error, got {other:?}"),
        }
    }

    #[test]
    fn negative_power_reports_row_index() {
        let net = tiny_net(3);
        let csv = "timestamp,1:load_p\nt0,0.3\nt1,-0.1\n";
        match ingest_timeseries(csv.as_bytes(), &net, 1.0, 1.0, None) {
            Err(Error::Ingestion { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected ingestion error, got {other:?}"),
        }
    }

    #[test]
    fn per_bus_scales_apply() {
        let net = tiny_net(3);
        let csv = "timestamp,1:load_p\nt0,0.5\n";
        let scales: BusScales = [(1, 2.0)].into_iter().collect();
        let samples = ingest_timeseries(csv.as_bytes(), &net, 1.0, 1.0, Some(&scales)).unwrap();
        assert_relative_eq!(samples[0].p_d[1], 1.0);
    }

    #[test]
    fn injections_subtract_load_from_renewable() {
        let net = tiny_net(3);
        let mut s = Sample::zeros("t", 3);
        s.p_r[1] = 0.9;
        s.p_d[1] = 0.2;
        s.q_d[1] = 0.1;
        s.p_d[2] = 0.5;
        let inj = net_injections(&s, &net).unwrap();
        assert_relative_eq!(inj.p[1], 0.7);
        assert_relative_eq!(inj.q[1], -0.1);
        assert_relative_eq!(inj.p[2], -0.5);
        assert_relative_eq!(inj.p[0], 0.0);
    }

    #[test]
    fn cancellation_gives_zero_injection() {
        let net = tiny_net(2);
        let mut s = Sample::zeros("t", 2);
        s.p_r[1] = 0.5;
        s.p_d[1] = 0.5;
        let inj = net_injections(&s, &net).unwrap();
        assert_relative_eq!(inj.p[1], 0.0);
    }

    fn sample_at(label: &str, x: f64) -> Sample {
        let mut s = Sample::zeros(label, 2);
        s.p_d[1] = x;
        s
    }

    #[test]
    fn k_equal_to_sample_count_is_identity() {
        let samples: Vec<Sample> = (0..4).map(|i| sample_at(&format!("t{i}"), i as f64)).collect();
        let set = kmedoids_reduce(&samples, 4, 7).unwrap();
        assert_eq!(set.len(), 4);
        for (w, s) in set.scenarios.iter().enumerate() {
            assert_eq!(s.label, format!("t{w}"));
            assert_relative_eq!(set.pi[w], 0.25);
        }
    }

    #[test]
    fn k_one_picks_total_distance_minimizer() {
        let samples = vec![
            sample_at("a", 0.0),
            sample_at("b", 1.0),
            sample_at("c", 1.1),
            sample_at("d", 1.2),
            sample_at("e", 3.0),
        ];
        // exhaustive check: summed distances are a 6.3, b 3.3, c 3.2, d 3.3,
        // e 8.7, so the median point c is the unique medoid
        let set = kmedoids_reduce(&samples, 1, 0).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.scenarios[0].label, "c");
        assert_relative_eq!(set.pi[0], 1.0);
    }

    #[test]
    fn two_tight_clusters_split_four_two() {
        let samples = vec![
            sample_at("a", 0.00),
            sample_at("b", 0.01),
            sample_at("c", 0.02),
            sample_at("d", 0.03),
            sample_at("e", 5.00),
            sample_at("f", 5.01),
        ];
        let set = kmedoids_reduce(&samples, 2, 123).unwrap();
        // derived by exhaustive medoid-pair search over all C(6,2) choices:
        // any optimal pair has one medoid per cluster, so pi = (2/3, 1/3)
        let mut pis = set.pi.clone();
        pis.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_relative_eq!(pis[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(pis[1], 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn swap_objective_is_non_increasing() {
        let samples: Vec<Sample> = (0..12)
            .map(|i| sample_at(&format!("t{i}"), ((i * 37) % 12) as f64 * 0.3))
            .collect();
        let feats: Vec<Vec<f64>> = samples.iter().map(features).collect();
        let n = feats.len();
        let dist: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| euclidean(&feats[i], &feats[j])).collect())
            .collect();
        let (_, _, history) = kmedoids_core(&dist, 3, 5);
        for w in history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let samples: Vec<Sample> = (0..9).map(|i| sample_at(&format!("t{i}"), i as f64)).collect();
        for k in 1..=9 {
            let set = kmedoids_reduce(&samples, k, 11).unwrap();
            let total: f64 = set.pi.iter().sum();
            assert!((total - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn k_out_of_range_is_error() {
        let samples = vec![sample_at("a", 0.0)];
        assert!(matches!(
            kmedoids_reduce(&samples, 0, 0),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            kmedoids_reduce(&samples, 2, 0),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn ingest_then_serialize_round_trips() {
        let net = tiny_net(3);
        let csv = "timestamp,1:load_p,2:ren_p\nt0,0.51,0.07\nt1,0.62,0.00\n";
        let samples = ingest_timeseries(csv.as_bytes(), &net, 0.95, 1.5, None).unwrap();
        let set = ScenarioSet::uniform(samples).unwrap();
        let json = serde_json::to_string(&set).unwrap();
        let back: ScenarioSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back.scenarios, set.scenarios);
        assert_eq!(back.pi, set.pi);
    }
}

