//! The experiment configuration file: one versioned TOML document holding
//! field parameters, users, the channel distribution (explicit matrices or
//! an alpha profile), degree distributions, decoder choice, analysis rates
//! and the optimizer block.

use lcf_core::channel::{
    user_label, CountMode, SystemProfile, TransferMatrix, TransferMatrixDistribution, UserConfig,
};
use lcf_core::decoder::DecoderInstance;
use lcf_core::field::FieldSpec;
use lcf_core::lt::{DegreeDistribution, DegreeSchedule};
use lcf_core::optimizer::{DecoderTarget, Objective, OptimizationProblem};
use lcf_core::channel::ProfileAlphas;
use lcf_core::{Error, Result};
use serde::Deserialize;
use std::collections::BTreeMap;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub version: u32,
    #[serde(default)]
    pub field: FieldSection,
    #[serde(default)]
    pub packet: PacketSection,
    pub users: UsersSection,
    #[serde(default)]
    pub channel: Option<ChannelSection>,
    #[serde(default)]
    pub profile: Option<ProfileSection>,
    #[serde(default)]
    pub degrees: BTreeMap<String, DegreeSection>,
    #[serde(default)]
    pub decoder: Option<DecoderSection>,
    #[serde(default)]
    pub analysis: Option<AnalysisSection>,
    #[serde(default)]
    pub optimizer: Option<OptimizerSection>,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub q: u8,
    pub m: u8,
}

impl Default for FieldSection {
    fn default() -> Self {
        FieldSection { q: 2, m: 8 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSection {
    pub symbols: usize,
}

impl Default for PacketSection {
    fn default() -> Self {
        PacketSection { symbols: 8 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UsersSection {
    pub k: Vec<u64>,
    #[serde(default)]
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub slots: u64,
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default)]
    pub matrix: Vec<MatrixEntry>,
}

fn default_mode() -> String {
    "exact".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixEntry {
    pub rows: Vec<String>,
    pub p: f64,
}

/// Alpha profile alternative to explicit matrices: builds the unit-beta
/// canonical distribution.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    // two-user fields
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default)]
    pub ab: Option<f64>,
    // three-user fields
    #[serde(default)]
    pub single: Option<[f64; 3]>,
    #[serde(default)]
    pub pair: Option<[f64; 3]>,
    #[serde(default)]
    pub triple: Option<f64>,
    #[serde(default)]
    pub bar: Option<[f64; 3]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegreeSection {
    pub pairs: Vec<(usize, f64)>,
    #[serde(default = "default_schedule")]
    pub schedule: String,
}

fn default_schedule() -> String {
    "iid".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderSection {
    pub instance: String,
    #[serde(default)]
    pub iterations: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    pub c_over_beta: Vec<f64>,
    #[serde(default)]
    pub check_points: Vec<Vec<f64>>,
    #[serde(default)]
    pub multistart: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub objective: String,
    #[serde(default)]
    pub target_user: Option<String>,
    #[serde(default)]
    pub fixed_c_over_beta: Vec<(String, f64)>,
    #[serde(default = "default_decoder_target")]
    pub decoder: String,
    pub eta: Vec<f64>,
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    #[serde(default = "default_m_points")]
    pub m_points: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub degree_cap: Vec<usize>,
}

fn default_decoder_target() -> String {
    "batched".into()
}

fn default_t_max() -> usize {
    20
}

fn default_m_points() -> usize {
    20
}

fn default_restarts() -> usize {
    20
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub workers: Option<usize>,
}

/// Validated, resolved experiment configuration.
pub struct Experiment {
    pub spec: FieldSpec,
    pub packet_len: usize,
    pub k: Vec<u64>,
    pub labels: Vec<String>,
    pub slots: u64,
    pub mode: CountMode,
    pub g: Option<TransferMatrixDistribution>,
    pub degrees: Vec<Option<(DegreeDistribution, DegreeSchedule)>>,
    pub decoder: Option<DecoderInstance>,
    pub analysis: Option<AnalysisSettings>,
    pub optimizer: Option<(OptimizationProblem, usize)>,
    pub seed: u64,
    pub trials: usize,
    pub workers: usize,
}

pub struct AnalysisSettings {
    pub c_over_beta: Vec<f64>,
    pub check_points: Vec<Vec<f64>>,
    pub multistart: usize,
}

impl Experiment {
    pub fn user_count(&self) -> usize {
        self.k.len()
    }

    /// Per-user encoder configs; errors when a user has no degree section.
    pub fn user_configs(&self) -> Result<Vec<UserConfig>> {
        self.degrees
            .iter()
            .enumerate()
            .map(|(s, d)| {
                let (dist, schedule) = d.clone().ok_or_else(|| {
                    Error::Config(format!("missing [degrees.{}] section", self.labels[s]))
                })?;
                Ok(UserConfig { dist, schedule })
            })
            .collect()
    }

    pub fn distribution(&self) -> Result<&TransferMatrixDistribution> {
        self.g.as_ref().ok_or_else(|| {
            Error::Config("config needs a [channel] matrix list or a [profile] section".into())
        })
    }
}

pub fn parse(text: &str) -> Result<Experiment> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse {
        offset: 0,
        message: e.to_string(),
    })?;
    if raw.version != CONFIG_VERSION {
        return Err(Error::Config(format!(
            "config version {} unsupported (expected {CONFIG_VERSION})",
            raw.version
        )));
    }
    let spec = FieldSpec::new(raw.field.q, raw.field.m)?;
    let l = raw.users.k.len();
    if l == 0 || l > 8 {
        return Err(Error::Config("between 1 and 8 users are supported".into()));
    }
    let labels: Vec<String> = match raw.users.labels {
        Some(ls) => {
            if ls.len() != l {
                return Err(Error::Config("labels list must match user count".into()));
            }
            ls
        }
        None => (0..l).map(|s| user_label(s).to_string()).collect(),
    };
    if raw.packet.symbols == 0 {
        return Err(Error::Config("packets need at least one symbol".into()));
    }

    // channel distribution: explicit matrices win, then the alpha profile
    let mut g = None;
    if let Some(ch) = &raw.channel {
        if !ch.matrix.is_empty() {
            let support: Vec<(TransferMatrix, f64)> = ch
                .matrix
                .iter()
                .map(|e| {
                    let rows: Vec<&str> = e.rows.iter().map(|s| s.as_str()).collect();
                    if rows.len() != l {
                        return Err(Error::Config(format!(
                            "transfer matrix has {} rows for {l} users",
                            rows.len()
                        )));
                    }
                    Ok((TransferMatrix::from_digit_rows(spec, &rows)?, e.p))
                })
                .collect::<Result<_>>()?;
            g = Some(TransferMatrixDistribution::new(support)?);
        }
    }
    if g.is_none() {
        if let Some(p) = &raw.profile {
            let profile = profile_from_section(p, l)?;
            g = Some(lcf_core::optimizer::canonical_distribution(&profile)?);
        }
    }

    let mode = match raw.channel.as_ref().map(|c| c.mode.as_str()).unwrap_or("exact") {
        "exact" => CountMode::Exact,
        "iid" => CountMode::Iid,
        other => {
            return Err(Error::Config(format!(
                "channel mode must be \"exact\" or \"iid\", got {other:?}"
            )))
        }
    };

    let mut degrees: Vec<Option<(DegreeDistribution, DegreeSchedule)>> = vec![None; l];
    for (label, section) in &raw.degrees {
        let Some(s) = labels.iter().position(|x| x == label) else {
            return Err(Error::Config(format!("[degrees.{label}] has no matching user")));
        };
        let dist = DegreeDistribution::from_pairs_rounded(&section.pairs)?;
        let schedule = match section.schedule.as_str() {
            "iid" => DegreeSchedule::Iid,
            "exact" => DegreeSchedule::Exact,
            other => {
                return Err(Error::Config(format!(
                    "degree schedule must be \"iid\" or \"exact\", got {other:?}"
                )))
            }
        };
        if dist.max_degree() as u64 > raw.users.k[s] {
            return Err(Error::Config(format!(
                "user {label}: max degree {} exceeds K={}",
                dist.max_degree(),
                raw.users.k[s]
            )));
        }
        degrees[s] = Some((dist, schedule));
    }

    let decoder = raw
        .decoder
        .as_ref()
        .map(|d| parse_instance(&d.instance, d.iterations))
        .transpose()?;

    let analysis = raw
        .analysis
        .map(|a| {
            if a.c_over_beta.len() != l {
                return Err(Error::Config(
                    "analysis.c_over_beta needs one entry per user".into(),
                ));
            }
            Ok(AnalysisSettings {
                c_over_beta: a.c_over_beta,
                check_points: a.check_points,
                multistart: a.multistart.unwrap_or(4),
            })
        })
        .transpose()?;

    let optimizer = raw
        .optimizer
        .as_ref()
        .map(|o| {
            let objective = match o.objective.as_str() {
                "sum-rate" => Objective::MaxSumRate,
                "max-rate" => {
                    let target_label = o.target_user.as_ref().ok_or_else(|| {
                        Error::Config("max-rate objective needs target_user".into())
                    })?;
                    let target = labels
                        .iter()
                        .position(|x| x == target_label)
                        .ok_or_else(|| Error::Config(format!("unknown user {target_label}")))?;
                    let fixed: Vec<(usize, f64)> = o
                        .fixed_c_over_beta
                        .iter()
                        .map(|(lab, v)| {
                            labels
                                .iter()
                                .position(|x| x == lab)
                                .map(|u| (u, *v))
                                .ok_or_else(|| Error::Config(format!("unknown user {lab}")))
                        })
                        .collect::<Result<_>>()?;
                    Objective::MaxRate { target, fixed }
                }
                other => {
                    return Err(Error::Config(format!(
                        "optimizer objective must be \"sum-rate\" or \"max-rate\", got {other:?}"
                    )))
                }
            };
            let target = match o.decoder.as_str() {
                "batched" => DecoderTarget::Batched,
                "ordinary" => DecoderTarget::Ordinary,
                other => {
                    return Err(Error::Config(format!(
                        "optimizer decoder must be \"batched\" or \"ordinary\", got {other:?}"
                    )))
                }
            };
            let profile = match &raw.profile {
                Some(p) => profile_from_section(p, l)?,
                None => {
                    let dist = g.as_ref().ok_or_else(|| {
                        Error::Config("optimizer needs [profile] or [channel] matrices".into())
                    })?;
                    lcf_core::channel::derive_profile(dist)?
                }
            };
            let problem = OptimizationProblem {
                profile,
                target,
                objective,
                eta: o.eta.clone(),
                t_max: o.t_max,
                m_points: o.m_points,
                degree_cap: o.degree_cap.clone(),
            };
            problem.validate()?;
            Ok((problem, o.restarts))
        })
        .transpose()?;

    Ok(Experiment {
        spec,
        packet_len: raw.packet.symbols,
        k: raw.users.k,
        labels,
        slots: raw.channel.as_ref().map(|c| c.slots).unwrap_or(0),
        mode,
        g,
        degrees,
        decoder,
        analysis,
        optimizer,
        seed: raw.run.seed.unwrap_or(0),
        trials: raw.run.trials.unwrap_or(1),
        workers: raw.run.workers.unwrap_or(1),
    })
}

fn profile_from_section(p: &ProfileSection, l: usize) -> Result<SystemProfile> {
    match l {
        2 => {
            let (Some(a), Some(b), Some(ab)) = (p.a, p.b, p.ab) else {
                return Err(Error::Config("two-user profile needs a, b, ab".into()));
            };
            Ok(SystemProfile {
                users: 2,
                beta: 1.0,
                alphas: ProfileAlphas::TwoUser { a, b, ab },
            })
        }
        3 => {
            let (Some(single), Some(pair), Some(triple), Some(bar)) =
                (p.single, p.pair, p.triple, p.bar)
            else {
                return Err(Error::Config(
                    "three-user profile needs single, pair, triple, bar".into(),
                ));
            };
            let total: f64 = single.iter().sum::<f64>()
                + pair.iter().sum::<f64>()
                + triple
                + 2.0 * bar.iter().sum::<f64>();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "three-user profile fractions plus twice the bar terms must sum to 1, got {total}"
                )));
            }
            Ok(SystemProfile {
                users: 3,
                beta: 1.0,
                alphas: ProfileAlphas::ThreeUser {
                    single,
                    pair,
                    triple,
                    bar,
                },
            })
        }
        _ => Err(Error::Config("alpha profiles exist for 2 or 3 users".into())),
    }
}

pub fn parse_instance(name: &str, iterations: Option<usize>) -> Result<DecoderInstance> {
    match name {
        "substitution" => Ok(DecoderInstance::Substitution),
        "bp" => Ok(DecoderInstance::Bp(iterations.unwrap_or(2))),
        "ge" | "gaussian-elimination" => Ok(DecoderInstance::GaussianElimination),
        other => Err(Error::Config(format!(
            "decoder instance must be substitution | bp | ge, got {other:?}"
        ))),
    }
}
