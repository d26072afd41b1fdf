//! The seven operator commands. Each resolves its inputs from the manifest,
//! runs the library, and writes deterministic output files stamped with the
//! manifest hash.

use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Result};
use serde_json::json;

use sdnr::{
    bfs_sweep_pf, brute_force_optimum, check_limits, consistency, enumerate_radial,
    generate_dataset, ingest_timeseries, is_radial, jacobian, kmedoids_reduce, predict,
    resolve_weights, sigma_min, solve, train, two_stage_sbr, ArchChoice, BusScales, Error,
    Evaluator, GenOpts, Hyperparams, LabeledDataset, Network, NetworkStateEncoding,
    PredictorModel, Sample, ScenarioSet, SolverOptions, SwitchStatus,
};

use crate::manifest::RunManifest;
use crate::output::{join_ids, write_json, Provenance};

/// Exit codes: 0 success, 2 input missing/unreadable, 3 precondition,
/// 4 degenerate data, 5 numeric failure.
pub struct CmdError {
    pub code: i32,
    pub message: String,
}

pub type CmdResult = std::result::Result<(), CmdError>;

impl CmdError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<anyhow::Error> for CmdError {
    fn from(e: anyhow::Error) -> Self {
        CmdError::new(2, format!("{e:#}"))
    }
}

impl From<Error> for CmdError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Format(_) | Error::Case(_) => 2,
            Error::Ingestion { .. } => 2,
            Error::Dimension(_)
            | Error::Topology(_)
            | Error::Argument(_)
            | Error::EnumerationTruncated { .. } => 3,
            Error::EmptyDataset(_) => 4,
            Error::Infeasible { .. }
            | Error::NoFeasibleTopology
            | Error::Numeric(_)
            | Error::Training(_) => 5,
        };
        CmdError::new(code, e.to_string())
    }
}

pub struct Ctx {
    pub manifest: RunManifest,
    pub prov: Provenance,
}

impl Ctx {
    pub fn new(manifest: RunManifest) -> Result<Self> {
        let prov = Provenance::new(&manifest)?;
        Ok(Self { manifest, prov })
    }

    fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tolerance: self.manifest.tolerance.unwrap_or(1e-8),
            max_iterations: self.manifest.max_iterations.unwrap_or(50),
            flat_start: true,
        }
    }

    fn out_dir(&self) -> Result<PathBuf> {
        let out = self.manifest.require_out()?.to_path_buf();
        std::fs::create_dir_all(&out)?;
        Ok(out)
    }

    fn network(&self) -> std::result::Result<Network, CmdError> {
        let path = self.manifest.require_network()?;
        Ok(Network::from_file(path)?)
    }

    fn bus_scales(&self) -> std::result::Result<Option<BusScales>, CmdError> {
        match &self.manifest.scales {
            None => Ok(None),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CmdError::new(2, format!("scales file {}: {e}", path.display()))
                })?;
                let scales: BusScales = serde_json::from_str(&text)
                    .map_err(|e| CmdError::new(2, format!("scales file: {e}")))?;
                Ok(Some(scales))
            }
        }
    }

    /// Raw per-hour samples: a CSV is ingested with the fixed power factor
    /// and renewable scaling; a JSON scenario file contributes its samples.
    fn samples(&self, net: &Network) -> std::result::Result<Vec<Sample>, CmdError> {
        let path = self.manifest.require_scenarios()?;
        if path.extension().and_then(|e| e.to_str()) == Some("csv") {
            let scales = self.bus_scales()?;
            let file = File::open(path)
                .map_err(|e| CmdError::new(2, format!("{}: {e}", path.display())))?;
            Ok(ingest_timeseries(
                file,
                net,
                self.manifest.power_factor.unwrap_or(0.95),
                self.manifest.kr.unwrap_or(1.0),
                scales.as_ref(),
            )?)
        } else {
            Ok(ScenarioSet::from_file(path)?.scenarios)
        }
    }

    /// A weighted scenario set: CSV input is clustered when `k` is given,
    /// otherwise every row becomes an equally weighted scenario.
    fn scenario_set(&self, net: &Network) -> std::result::Result<ScenarioSet, CmdError> {
        let path = self.manifest.require_scenarios()?;
        if path.extension().and_then(|e| e.to_str()) == Some("csv") {
            let samples = self.samples(net)?;
            match self.manifest.k {
                Some(k) => {
                    if k == 0 || k > samples.len() {
                        return Err(CmdError::new(
                            4,
                            format!("k = {k} outside 1..={} samples", samples.len()),
                        ));
                    }
                    Ok(kmedoids_reduce(&samples, k, self.manifest.seed())?)
                }
                None => Ok(ScenarioSet::uniform(samples)?),
            }
        } else {
            Ok(ScenarioSet::from_file(path)?)
        }
    }

    fn evaluator(&self) -> std::result::Result<Evaluator, CmdError> {
        match self.manifest.evaluator.as_deref().unwrap_or("exact") {
            "exact" => Ok(Evaluator::exact_sigma_min()),
            "surrogate" => {
                let path = self
                    .manifest
                    .model
                    .as_ref()
                    .ok_or_else(|| CmdError::new(3, "surrogate evaluator requires --model"))?;
                if !path.exists() {
                    return Err(CmdError::new(2, format!("model file not found: {}", path.display())));
                }
                Ok(Evaluator::surrogate(PredictorModel::load(path)?)?)
            }
            other => Err(CmdError::new(3, format!("unknown evaluator '{other}'"))),
        }
    }

    /// Objective weights with orientation-aware defaults: `k_v` defaults to
    /// -0.5 for a higher-is-stable index and +0.5 otherwise.
    fn weights(
        &self,
        net: &Network,
        scen: &ScenarioSet,
        ev: &Evaluator,
        opts: &SolverOptions,
    ) -> std::result::Result<sdnr::ObjectiveWeights, CmdError> {
        let k_l = self.manifest.kl.unwrap_or(0.5);
        let k_v = self.manifest.kv.unwrap_or(match ev.kind.orientation {
            sdnr::Orientation::HigherIsStable => -0.5,
            sdnr::Orientation::LowerIsStable => 0.5,
        });
        Ok(resolve_weights(
            net,
            scen,
            k_l,
            k_v,
            self.manifest.cl_max,
            self.manifest.iv_max,
            opts,
        )?)
    }
}

fn open_status(manifest: &RunManifest, net: &Network) -> std::result::Result<SwitchStatus, CmdError> {
    let open = manifest.open.clone().unwrap_or_default();
    for &e in &open {
        if e >= net.n_branches() {
            return Err(CmdError::new(
                3,
                format!("--open branch {e} out of range ({} branches)", net.n_branches()),
            ));
        }
    }
    Ok(SwitchStatus::with_open(net.n_branches(), &open))
}

pub fn cmd_pf(ctx: &Ctx) -> CmdResult {
    let net = ctx.network()?;
    let scen = ctx.scenario_set(&net)?;
    let alpha = open_status(&ctx.manifest, &net)?;
    let radial = is_radial(&net, &alpha)?;
    if !radial && !ctx.manifest.meshed.unwrap_or(false) {
        return Err(CmdError::new(
            3,
            "topology is not radial; pass --meshed to solve it anyway",
        ));
    }
    let opts = ctx.solver_options();
    let out = ctx.out_dir().map_err(CmdError::from)?;
    let exact = Evaluator::exact_sigma_min();

    let mut summary = csv::Writer::from_path(out.join("pf_summary.csv"))
        .map_err(|e| CmdError::new(2, e.to_string()))?;
    summary
        .write_record(["scenario", "label", "pi", "loss", "delta_min", "violations", "iterations", "max_mismatch"])
        .map_err(|e| CmdError::new(2, e.to_string()))?;

    for (w, sample) in scen.scenarios.iter().enumerate() {
        let sol = solve(&net, &alpha, sample, &opts)?;
        if !sol.converged {
            return Err(CmdError::new(
                5,
                format!("scenario {w} did not converge (mismatch {})", sol.max_mismatch),
            ));
        }
        let violations = check_limits(&sol, &net);
        let delta_min = sigma_min(&jacobian(&net, &alpha, &sol)?)?;
        let doc = ctx
            .prov
            .wrap(
                "sdnr-pf-solution/1",
                &json!({
                    "scenario": w,
                    "label": sample.label,
                    "pi": scen.pi[w],
                    "open_branches": alpha.open_ids(),
                    "solution": sol,
                    "delta_min": delta_min,
                    "violations": violations,
                }),
            )
            .map_err(CmdError::from)?;
        write_json(&out.join(format!("pf_scenario_{w}.json")), &doc).map_err(CmdError::from)?;
        summary
            .write_record([
                w.to_string(),
                sample.label.clone(),
                format!("{}", scen.pi[w]),
                format!("{}", sol.loss),
                format!("{delta_min}"),
                violations.len().to_string(),
                sol.iterations.to_string(),
                format!("{}", sol.max_mismatch),
            ])
            .map_err(|e| CmdError::new(2, e.to_string()))?;
    }
    summary.flush().map_err(|e| CmdError::new(2, e.to_string()))?;
    println!(
        "pf: {} scenario solutions written to {}",
        scen.len(),
        out.display()
    );
    Ok(())
}

pub fn cmd_cluster(ctx: &Ctx) -> CmdResult {
    let net = ctx.network()?;
    let samples = ctx.samples(&net)?;
    if samples.is_empty() {
        return Err(CmdError::new(4, "time series has no rows"));
    }
    let set = match ctx.manifest.k {
        Some(k) => {
            if k == 0 || k > samples.len() {
                return Err(CmdError::new(
                    4,
                    format!("k = {k} outside 1..={} samples", samples.len()),
                ));
            }
            kmedoids_reduce(&samples, k, ctx.manifest.seed())?
        }
        None => ScenarioSet::uniform(samples)?,
    };
    let out = ctx.out_dir().map_err(CmdError::from)?;
    let doc = ctx
        .prov
        .wrap("sdnr-scenarios/1", &set)
        .map_err(CmdError::from)?;
    write_json(&out.join("scenarios.json"), &doc).map_err(CmdError::from)?;
    println!("cluster: {} scenarios written to {}", set.len(), out.display());
    Ok(())
}

pub fn cmd_enumerate(ctx: &Ctx) -> CmdResult {
    let net = ctx.network()?;
    let list = ctx.manifest.list.unwrap_or(false);
    let out = if list || ctx.manifest.out.is_some() {
        Some(ctx.out_dir().map_err(CmdError::from)?)
    } else {
        None
    };
    let mut writer = match (&out, list) {
        (Some(dir), true) => {
            let mut w = csv::Writer::from_path(dir.join("configs.csv"))
                .map_err(|e| CmdError::new(2, e.to_string()))?;
            w.write_record(["config", "open_branches"])
                .map_err(|e| CmdError::new(2, e.to_string()))?;
            Some(w)
        }
        _ => None,
    };
    let mut count = 0usize;
    let mut truncated = false;
    for status in enumerate_radial(&net, ctx.manifest.cap) {
        match status {
            Ok(alpha) => {
                if let Some(w) = writer.as_mut() {
                    w.write_record([count.to_string(), join_ids(&alpha.open_ids())])
                        .map_err(|e| CmdError::new(2, e.to_string()))?;
                }
                count += 1;
            }
            Err(Error::EnumerationTruncated { yielded }) => {
                count = yielded;
                truncated = true;
            }
            Err(e) => return Err(e.into()),
        }
    }
    if let Some(mut w) = writer {
        w.flush().map_err(|e| CmdError::new(2, e.to_string()))?;
    }
    println!("{count}");
    if let Some(dir) = out {
        let doc = ctx
            .prov
            .wrap(
                "sdnr-enumeration/1",
                &json!({"count": count, "truncated": truncated}),
            )
            .map_err(CmdError::from)?;
        write_json(&dir.join("enumerate.json"), &doc).map_err(CmdError::from)?;
    }
    if truncated {
        return Err(CmdError::new(
            3,
            format!("enumeration truncated at cap ({count} configurations counted)"),
        ));
    }
    Ok(())
}

pub fn cmd_gendata(ctx: &Ctx) -> CmdResult {
    let net = ctx.network()?;
    let samples = ctx.samples(&net)?;
    if samples.is_empty() {
        return Err(CmdError::new(4, "no samples available"));
    }
    let mut configs: Vec<SwitchStatus> = Vec::new();
    for status in enumerate_radial(&net, ctx.manifest.cap) {
        configs.push(status?);
    }
    if let Some(limit) = ctx.manifest.configs {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(ctx.manifest.seed());
        configs.shuffle(&mut rng);
        configs.truncate(limit);
    }
    let opts = GenOpts {
        seed: ctx.manifest.seed(),
        max_pairs: ctx.manifest.pairs,
        test_fraction: ctx.manifest.test_fraction.unwrap_or(0.3),
        solver: ctx.solver_options(),
    };
    let data = generate_dataset(&net, &configs, &samples, &opts)?;
    let out = ctx.out_dir().map_err(CmdError::from)?;
    let path = out.join("dataset.bin");
    data.save_with_meta(&path, Some(ctx.prov.header("sdnr-dataset/1")))?;
    println!(
        "gendata: {} labeled rows ({} held out) written to {}",
        data.len(),
        data.test_indices.len(),
        path.display()
    );
    Ok(())
}

fn hyperparams(manifest: &RunManifest) -> std::result::Result<Hyperparams, CmdError> {
    let mut hp = Hyperparams::default();
    if let Some(e) = manifest.epochs {
        hp.epochs = e;
    }
    if let Some(b) = manifest.batch_size {
        hp.batch_size = b;
    }
    if let Some(lr) = manifest.learning_rate {
        hp.learning_rate = lr;
    }
    if let Some(d) = manifest.dropout {
        hp.dropout = d;
    }
    hp.arch = match manifest.arch.as_deref() {
        None | Some("auto") => ArchChoice::Auto,
        Some("mlp") => ArchChoice::Mlp,
        Some("conv") => ArchChoice::Conv,
        Some(other) => {
            return Err(CmdError::new(3, format!("unknown arch '{other}'")));
        }
    };
    Ok(hp)
}

fn rows_of(data: &LabeledDataset, idx: &[usize]) -> Vec<NetworkStateEncoding> {
    idx.iter()
        .map(|&r| NetworkStateEncoding {
            rows: data.features[r]
                .chunks_exact(8)
                .map(|c| <[f64; 8]>::try_from(c).unwrap())
                .collect(),
        })
        .collect()
}

pub fn cmd_train(ctx: &Ctx) -> CmdResult {
    let path = ctx.manifest.require_dataset()?;
    let data = LabeledDataset::load(path)?;
    if data.test_indices.len() < 2 || data.train_indices().is_empty() {
        return Err(CmdError::new(
            4,
            format!(
                "degenerate split: {} train rows, {} test rows",
                data.train_indices().len(),
                data.test_indices.len()
            ),
        ));
    }
    let hp = hyperparams(&ctx.manifest)?;
    let model = train(&data, &hp, ctx.manifest.seed())?;

    let test_real: Vec<f64> = data.test_indices.iter().map(|&r| data.labels[r]).collect();
    let test_pred: Vec<f64> = rows_of(&data, &data.test_indices)
        .iter()
        .map(|enc| predict(&model, enc))
        .collect::<sdnr::Result<_>>()?;
    let held_out_consistency = consistency(&test_real, &test_pred)?;

    let out = ctx.out_dir().map_err(CmdError::from)?;
    model.save_with_meta(out.join("model.json"), Some(ctx.prov.header("sdnr-model/1")))?;
    let metrics = ctx
        .prov
        .wrap(
            "sdnr-train-metrics/1",
            &json!({
                "rows": data.len(),
                "train_rows": data.train_indices().len(),
                "test_rows": data.test_indices.len(),
                "final_train_mse": model.meta.final_train_mse,
                "final_test_mse": model.meta.final_test_mse,
                "held_out_consistency_pct": held_out_consistency,
            }),
        )
        .map_err(CmdError::from)?;
    write_json(&out.join("metrics.json"), &metrics).map_err(CmdError::from)?;
    println!(
        "train: test MSE {:.4e}, held-out consistency {:.2}%",
        model.meta.final_test_mse, held_out_consistency
    );
    Ok(())
}

pub fn cmd_reconfigure(ctx: &Ctx) -> CmdResult {
    let net = ctx.network()?;
    let scen = ctx.scenario_set(&net)?;
    let opts = ctx.solver_options();
    let ev = ctx.evaluator()?;
    let w = ctx.weights(&net, &scen, &ev, &opts)?;
    let res = two_stage_sbr(&net, &scen, &w, &ev, ctx.manifest.nmax.unwrap_or(5), &opts)?;

    let out = ctx.out_dir().map_err(CmdError::from)?;
    let doc = ctx
        .prov
        .wrap(
            "sdnr-sbr-result/1",
            &json!({
                "evaluator": ctx.manifest.evaluator.clone().unwrap_or_else(|| "exact".into()),
                "open_branches": res.alpha_star.open_ids(),
                "objective": res.objective,
                "weights": res.weights,
                "outer_iterations": res.outer_iterations,
                "alpha": res.alpha_star,
            }),
        )
        .map_err(CmdError::from)?;
    write_json(&out.join("sbr_result.json"), &doc).map_err(CmdError::from)?;

    let mut trace = csv::Writer::from_path(out.join("sbr_trace.csv"))
        .map_err(|e| CmdError::new(2, e.to_string()))?;
    trace
        .write_record(["stage", "outer", "inner", "branch", "open_set", "c_l", "i_v", "score", "feasible"])
        .map_err(|e| CmdError::new(2, e.to_string()))?;
    for t in &res.trace {
        trace
            .write_record([
                format!("{:?}", t.stage),
                t.outer.to_string(),
                t.inner.to_string(),
                t.branch.map(|b| b.to_string()).unwrap_or_default(),
                join_ids(&t.open_set),
                format!("{}", t.c_l),
                format!("{}", t.i_v),
                format!("{}", t.score),
                t.feasible.to_string(),
            ])
            .map_err(|e| CmdError::new(2, e.to_string()))?;
    }
    trace.flush().map_err(|e| CmdError::new(2, e.to_string()))?;
    println!(
        "reconfigure: open {:?}, objective {:.6}",
        res.alpha_star.open_ids(),
        res.objective
    );
    Ok(())
}

pub fn cmd_oracle(ctx: &Ctx) -> CmdResult {
    let net = ctx.network()?;
    let scen = ctx.scenario_set(&net)?;
    let opts = ctx.solver_options();
    let ev = Evaluator::exact_sigma_min();
    let w = ctx.weights(&net, &scen, &ev, &opts)?;
    let report = brute_force_optimum(&net, &scen, &w, &ev, &opts, ctx.manifest.cap)?;

    let out = ctx.out_dir().map_err(CmdError::from)?;
    let mut table = csv::Writer::from_path(out.join("oracle.csv"))
        .map_err(|e| CmdError::new(2, e.to_string()))?;
    table
        .write_record(["config", "open_branches", "objective", "c_l", "i_v", "feasible"])
        .map_err(|e| CmdError::new(2, e.to_string()))?;
    for row in &report.rows {
        table
            .write_record([
                row.config.to_string(),
                join_ids(&row.open),
                format!("{}", row.score),
                format!("{}", row.c_l),
                format!("{}", row.i_v),
                row.feasible.to_string(),
            ])
            .map_err(|e| CmdError::new(2, e.to_string()))?;
    }
    table.flush().map_err(|e| CmdError::new(2, e.to_string()))?;
    let doc = ctx
        .prov
        .wrap(
            "sdnr-oracle/1",
            &json!({
                "configurations": report.rows.len(),
                "infeasible": report.infeasible_count,
                "weights": w,
                "best": report.best_row(),
            }),
        )
        .map_err(CmdError::from)?;
    write_json(&out.join("oracle_best.json"), &doc).map_err(CmdError::from)?;
    match report.best_row() {
        Some(best) => println!(
            "oracle: best open {:?}, objective {:.6} over {} configs",
            best.open,
            best.score,
            report.rows.len()
        ),
        None => println!("oracle: no feasible configuration"),
    }
    Ok(())
}

