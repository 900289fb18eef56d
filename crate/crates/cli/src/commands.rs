//! Implementations of the five subcommands.

use crate::config::Experiment;
use crate::report::Report;
use lcf_core::analysis::{first_intersection, fixed_point, AnalysisConfig, Poly};
use lcf_core::channel::{derive_profile, generate_batches, rate_region_bounds, ProfileAlphas};
use lcf_core::decoder::{decode, DecodeOutcome, DecoderConfig, DecoderInstance};
use lcf_core::lif::LifTable;
use lcf_core::optimizer::{certify_with_analysis, solve as optimizer_solve};
use lcf_core::packet::Packet;
use lcf_core::trace::{read_trace, write_trace, Trace, TraceHeader};
use lcf_core::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::Path;

/// Order-independent per-trial generator: hash of (master seed, index).
pub fn trial_rng(master: u64, index: u64) -> ChaCha12Rng {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest[..32]);
    ChaCha12Rng::from_seed(seed)
}

fn random_inputs(exp: &Experiment, rng: &mut ChaCha12Rng) -> Vec<Vec<Packet>> {
    exp.k
        .iter()
        .map(|&k| {
            (0..k)
                .map(|_| Packet::random(exp.spec, exp.packet_len, rng))
                .collect()
        })
        .collect()
}

fn make_header(exp: &Experiment) -> TraceHeader {
    TraceHeader {
        spec: exp.spec,
        users: exp.user_count(),
        packet_len: exp.packet_len,
        slots: exp.slots,
        k: exp.k.clone(),
    }
}

// ---------------------------------------------------------------------------
// encode
// ---------------------------------------------------------------------------

pub fn run_encode(
    exp: &Experiment,
    payload_files: &[std::path::PathBuf],
    out: &Path,
    report: &mut Report,
) -> Result<()> {
    let g = exp.distribution()?;
    if exp.slots == 0 {
        return Err(Error::Config("channel.slots must be positive for encode".into()));
    }
    let users = exp.user_configs()?;
    let mut rng = trial_rng(exp.seed, 0);
    let inputs: Vec<Vec<Packet>> = if payload_files.is_empty() {
        random_inputs(exp, &mut rng)
    } else {
        if payload_files.len() != exp.user_count() {
            return Err(Error::Config(format!(
                "need one payload file per user ({} users)",
                exp.user_count()
            )));
        }
        let width = exp.spec.symbol_width();
        payload_files
            .iter()
            .zip(&exp.k)
            .map(|(path, &k)| {
                let bytes = std::fs::read(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                let per = exp.packet_len * width;
                if bytes.len() != per * k as usize {
                    return Err(Error::Config(format!(
                        "{}: expected {} bytes (K={} packets of {} bytes), got {}",
                        path.display(),
                        per * k as usize,
                        k,
                        per,
                        bytes.len()
                    )));
                }
                bytes
                    .chunks_exact(per)
                    .map(|c| Packet::from_bytes(exp.spec, exp.packet_len, c))
                    .collect()
            })
            .collect::<Result<_>>()?
    };
    let batches = generate_batches(
        &inputs,
        &users,
        g,
        exp.slots as usize,
        exp.mode,
        &mut rng,
    )?;
    let header = make_header(exp);
    let bytes = write_trace(&header, &batches);
    std::fs::write(out, &bytes)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", out.display())))?;
    #[derive(Serialize)]
    struct EncodeRecord {
        slots: u64,
        batches: usize,
        trace_bytes: usize,
    }
    report.push_record(
        "encode",
        &EncodeRecord {
            slots: exp.slots,
            batches: batches.len(),
            trace_bytes: bytes.len(),
        },
    )?;
    report.note(format!(
        "wrote {} batches over {} slots to {} ({} bytes)",
        batches.len(),
        exp.slots,
        out.display(),
        bytes.len()
    ));
    Ok(())
}

// ---------------------------------------------------------------------------
// decode
// ---------------------------------------------------------------------------

pub fn run_decode(
    trace_path: &Path,
    exp: Option<&Experiment>,
    instance: DecoderInstance,
    out_dir: Option<&Path>,
    report: &mut Report,
) -> Result<()> {
    let bytes = std::fs::read(trace_path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", trace_path.display())))?;
    let Trace { header, batches } = read_trace(&bytes)?;
    if let Some(exp) = exp {
        if exp.user_count() != header.users {
            return Err(Error::Config(format!(
                "config has {} users, trace has {}",
                exp.user_count(),
                header.users
            )));
        }
        if exp.spec != header.spec || exp.packet_len != header.packet_len || exp.k != header.k {
            return Err(Error::Config(
                "config field/packet/K parameters disagree with the trace header".into(),
            ));
        }
    }
    let outcome: DecodeOutcome = decode(&header, &batches, &DecoderConfig { instance })?;
    let labels: Vec<String> = match exp {
        Some(e) => e.labels.clone(),
        None => (0..header.users)
            .map(|s| lcf_core::channel::user_label(s).to_string())
            .collect(),
    };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
        for (s, label) in labels.iter().enumerate() {
            let mut payload = Vec::new();
            let mut mask = vec![0u8; (header.k[s] as usize).div_ceil(8)];
            for (i, slot) in outcome.recovered[s].iter().enumerate() {
                match slot {
                    Some(p) => {
                        p.write_bytes(&mut payload);
                        mask[i / 8] |= 1 << (i % 8);
                    }
                    None => {
                        payload.extend(std::iter::repeat(0u8).take(
                            header.packet_len * header.spec.symbol_width(),
                        ));
                    }
                }
            }
            std::fs::write(dir.join(format!("recovered_{label}.bin")), payload)
                .map_err(|e| Error::Config(format!("write failed: {e}")))?;
            std::fs::write(dir.join(format!("recovered_{label}.mask")), mask)
                .map_err(|e| Error::Config(format!("write failed: {e}")))?;
        }
    }
    report.push_record("decode", &outcome.report)?;
    for (s, label) in labels.iter().enumerate() {
        report.note(format!(
            "user {label}: decoded {}/{} ({:.4})",
            outcome.report.decoded_counts[s],
            header.k[s],
            outcome.report.decoded_fractions[s]
        ));
    }
    report.note(format!(
        "rounds {} field-ops {}",
        outcome.report.rounds, outcome.report.field_ops
    ));
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Serialize, Clone)]
struct TrialRecord {
    trial: usize,
    decoded_fractions: Vec<f64>,
    rounds: usize,
    field_ops: u64,
}

pub fn run_simulate(exp: &Experiment, report: &mut Report) -> Result<()> {
    let g = exp.distribution()?;
    if exp.slots == 0 {
        return Err(Error::Config("channel.slots must be positive for simulate".into()));
    }
    let users = exp.user_configs()?;
    let instance = exp.decoder.unwrap_or(DecoderInstance::GaussianElimination);
    let header = make_header(exp);
    let trials = exp.trials.max(1);

    let run_trial = |trial: usize| -> Result<TrialRecord> {
        let mut rng = trial_rng(exp.seed, trial as u64);
        let inputs = random_inputs(exp, &mut rng);
        let batches =
            generate_batches(&inputs, &users, g, exp.slots as usize, exp.mode, &mut rng)?;
        let outcome = decode(&header, &batches, &DecoderConfig { instance })?;
        // recovered payloads must reproduce the inputs exactly
        for (s, per_user) in outcome.recovered.iter().enumerate() {
            for (i, slot) in per_user.iter().enumerate() {
                if let Some(p) = slot {
                    if p != &inputs[s][i] {
                        return Err(Error::Corruption(format!(
                            "trial {trial}: user {s} input {i} decoded incorrectly"
                        )));
                    }
                }
            }
        }
        Ok(TrialRecord {
            trial,
            decoded_fractions: outcome.report.decoded_fractions,
            rounds: outcome.report.rounds,
            field_ops: outcome.report.field_ops,
        })
    };

    let results: Vec<TrialRecord> = if exp.workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(exp.workers)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        pool.install(|| {
            use rayon::prelude::*;
            (0..trials)
                .into_par_iter()
                .map(run_trial)
                .collect::<Result<Vec<_>>>()
        })?
    } else {
        (0..trials).map(run_trial).collect::<Result<Vec<_>>>()?
    };

    for r in &results {
        report.push_record("trial", r)?;
    }

    #[derive(Serialize)]
    struct Aggregate {
        user: String,
        mean: f64,
        min: f64,
        p10: f64,
        median: f64,
        max: f64,
    }
    let l = exp.user_count();
    for s in 0..l {
        let mut fr: Vec<f64> = results.iter().map(|r| r.decoded_fractions[s]).collect();
        fr.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mean = fr.iter().sum::<f64>() / fr.len() as f64;
        let q = |p: f64| fr[(p * (fr.len() - 1) as f64).round() as usize];
        let agg = Aggregate {
            user: exp.labels[s].clone(),
            mean,
            min: fr[0],
            p10: q(0.10),
            median: q(0.5),
            max: fr[fr.len() - 1],
        };
        report.note(format!(
            "user {}: mean {:.4} min {:.4} p10 {:.4} median {:.4} max {:.4}",
            agg.user, agg.mean, agg.min, agg.p10, agg.median, agg.max
        ));
        report.push_record("aggregate", &agg)?;
    }

    // theory side-by-side when rates are specified
    if let Some(settings) = &exp.analysis {
        let beta = g.beta();
        let table = LifTable::build(g, instance.lif_kind());
        let psis: Vec<Poly<f64>> = exp
            .user_configs()?
            .iter()
            .map(|u| Poly::from_distribution(&u.dist))
            .collect();
        let c: Vec<f64> = settings.c_over_beta.iter().map(|v| v * beta).collect();
        let cfg = AnalysisConfig::<f64>::new(psis, c, table)?;
        let trace = fixed_point(&cfg)?;
        #[derive(Serialize)]
        struct Theory {
            limit: Vec<f64>,
            iterations: usize,
            converged: bool,
        }
        report.note(format!(
            "theory limit {:?} after {} iterations",
            trace.limit, trace.iterations
        ));
        report.push_record(
            "theory",
            &Theory {
                limit: trace.limit,
                iterations: trace.iterations,
                converged: trace.converged,
            },
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

pub fn run_analyze(exp: &Experiment, report: &mut Report) -> Result<()> {
    let g = exp.distribution()?;
    let settings = exp
        .analysis
        .as_ref()
        .ok_or_else(|| Error::Config("analyze needs an [analysis] section".into()))?;
    let beta = g.beta();
    let profile = derive_profile(g)?;

    #[derive(Serialize)]
    struct ProfileRecord {
        beta: f64,
        alphas: Vec<(String, f64)>,
    }
    let mut alphas = Vec::new();
    match &profile.alphas {
        ProfileAlphas::TwoUser { a, b, ab } => {
            alphas.push(("a".to_string(), *a));
            alphas.push(("b".to_string(), *b));
            alphas.push(("ab".to_string(), *ab));
        }
        ProfileAlphas::ThreeUser {
            single,
            pair,
            triple,
            bar,
        } => {
            for (i, v) in single.iter().enumerate() {
                alphas.push((format!("single_{}", exp.labels[i]), *v));
            }
            for (name, v) in ["ab", "ac", "bc"].iter().zip(pair) {
                alphas.push((name.to_string(), *v));
            }
            alphas.push(("abc".to_string(), *triple));
            for (i, v) in bar.iter().enumerate() {
                alphas.push((format!("bar_{}", exp.labels[i]), *v));
            }
        }
        ProfileAlphas::General => {}
    }
    report.note(format!("beta = {beta:.6}"));
    report.push_record("profile", &ProfileRecord { beta, alphas })?;

    #[derive(Serialize)]
    struct BoundRecord {
        subset: String,
        bound: f64,
    }
    for (subset, bound) in rate_region_bounds(g) {
        let name: String = subset.iter().map(|&s| exp.labels[s].clone()).collect();
        report.push_record("rate_bound", &BoundRecord { subset: name, bound })?;
    }

    let instance = exp.decoder.unwrap_or(DecoderInstance::GaussianElimination);
    let table = LifTable::build(g, instance.lif_kind());
    let psis: Vec<Poly<f64>> = exp
        .user_configs()?
        .iter()
        .map(|u| Poly::from_distribution(&u.dist))
        .collect();
    let c: Vec<f64> = settings.c_over_beta.iter().map(|v| v * beta).collect();
    let cfg = AnalysisConfig::<f64>::new(psis, c, table)?;
    let mut rng = trial_rng(exp.seed, u64::MAX);
    let trace = first_intersection(&cfg, settings.multistart, &mut rng)?;

    #[derive(Serialize)]
    struct IterateRecord {
        iteration: usize,
        z: Vec<f64>,
    }
    let step = (trace.iterates.len() / 200).max(1);
    for (i, z) in trace.iterates.iter().enumerate() {
        if i % step == 0 || i + 1 == trace.iterates.len() {
            report.push_record("iterate", &IterateRecord { iteration: i, z: z.clone() })?;
        }
    }
    #[derive(Serialize)]
    struct LimitRecord {
        limit: Vec<f64>,
        iterations: usize,
        converged: bool,
    }
    report.note(format!(
        "first intersection {:?} ({} iterations, converged={})",
        trace.limit, trace.iterations, trace.converged
    ));
    report.push_record(
        "limit",
        &LimitRecord {
            limit: trace.limit.clone(),
            iterations: trace.iterations,
            converged: trace.converged,
        },
    )?;

    #[derive(Serialize)]
    struct PointRecord {
        point: Vec<f64>,
        feasible: bool,
    }
    for point in &settings.check_points {
        if point.len() != exp.user_count() {
            return Err(Error::Config("check point has wrong dimension".into()));
        }
        let feasible = cfg.is_feasible(point);
        report.note(format!("point {point:?} feasible = {feasible}"));
        report.push_record(
            "feasibility",
            &PointRecord {
                point: point.clone(),
                feasible,
            },
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------

pub fn run_optimize(exp: &Experiment, restarts_override: Option<usize>, report: &mut Report) -> Result<()> {
    let (problem, restarts) = exp
        .optimizer
        .as_ref()
        .ok_or_else(|| Error::Config("optimize needs an [optimizer] section".into()))?;
    let restarts = restarts_override.unwrap_or(*restarts);
    let mut rng = trial_rng(exp.seed, u64::MAX - 1);
    let result = optimizer_solve(problem, &mut rng, restarts)?;
    let certified = certify_with_analysis(problem, &result)?;
    if matches!(
        result.verification,
        lcf_core::optimizer::Verification::Infeasible
    ) {
        report.push_record("optimize", &result)?;
        report.note("no feasible configuration found".into());
        return Err(Error::Infeasible(
            "optimizer found no feasible configuration".into(),
        ));
    }
    report.note(format!(
        "objective {:.4} (normalized), verification {:?}, analysis-certified {}",
        result.objective, result.verification, certified
    ));
    for (s, psi) in result.psi.iter().enumerate() {
        report.note(format!(
            "user {} theta {:.4} psi {:?}",
            exp.labels[s], result.theta[s], psi
        ));
    }
    report.push_record("optimize", &result)?;
    #[derive(Serialize)]
    struct Certified {
        analysis_certified: bool,
    }
    report.push_record("certification", &Certified { analysis_certified: certified })?;
    Ok(())
}
