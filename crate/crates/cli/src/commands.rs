use std::error::Error;
use std::fs::File;
use std::io::BufWriter;

use onticlab_core::bounds::{
    collapse_verdict, haar_cap_fraction, write_bounds_csv, CapFractionEstimate, CollapseReport,
    GrowthModel,
};
use onticlab_core::capacity::{
    blahut_arimoto, discretize_channel, mutual_information, oneshot_upper_bound, CapacityResult,
};
use onticlab_core::models::{
    self, classify_pairs, equipartition_diagnostic, ks_overlap_analytic, BornReport,
    Classification, EquipartitionReport, ModelKind, OverlapReport,
};
use onticlab_core::protocol::{
    estimate_cost_greedy, estimate_cost_plain, simulate_plain, CostOptions, CostReport,
    GreedySimulator, ResponseTable, SimulationReport, Transcript,
};
use onticlab_core::quantum::{bloch_of_qubit, projective_povm_along};
use onticlab_core::report::Envelope;
use onticlab_core::rng::{child_stream, derive_seed, Domain};
use onticlab_core::sphere::uniform_on_sphere;
use onticlab_core::{BlochVector, PureState, Vec3};
use serde::Serialize;

use crate::args::{linspace, Format, ProtocolArg};
use crate::{
    BoundsArgs, CapacityArgs, ClassifyArgs, Context, CostArgs, EquipartitionArgs, Outcome,
    OverlapArgs, SimulateArgs, VerifyBornArgs,
};

type CmdResult = Result<Outcome, Box<dyn Error>>;

/// Fixture streams: one index per command family.
const PAIRS_BORN: u64 = 0;
const PAIRS_CLASSIFY: u64 = 1;
const PAIRS_SIMULATE: u64 = 2;

fn json_only(ctx: &Context, command: &str) -> Result<(), Box<dyn Error>> {
    match ctx.format {
        Some(Format::Csv) => Err(format!("{command} reports are JSON only").into()),
        _ => Ok(()),
    }
}

fn envelope<T: Serialize>(
    ctx: &Context,
    command: &str,
    report: &T,
) -> Result<String, Box<dyn Error>> {
    Ok(Envelope::new(command, Some(ctx.seed), report).to_json()?)
}

fn state(v: Vec3) -> Result<PureState, Box<dyn Error>> {
    Ok(PureState::from_bloch(&BlochVector::new(v)?))
}

/// Explicit `(state, measurement)` or `count` random pairs of unit vectors.
fn pairs(
    ctx: &Context,
    stream: u64,
    fixed: (Option<Vec3>, Option<Vec3>),
    count: usize,
) -> Result<Vec<(Vec3, Vec3)>, Box<dyn Error>> {
    if count == 0 {
        return Err("--pairs must be positive".into());
    }
    let mut rng = child_stream(ctx.seed, Domain::Fixtures, stream);
    Ok((0..count)
        .map(|_| {
            let v = fixed.0.unwrap_or_else(|| uniform_on_sphere(&mut rng));
            let m = fixed.1.unwrap_or_else(|| uniform_on_sphere(&mut rng));
            (v, m)
        })
        .collect())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.3e}"))
}

#[derive(Serialize)]
struct BornCase {
    state: Vec3,
    measurement: Vec3,
    pass: bool,
    report: BornReport,
}

#[derive(Serialize)]
struct VerifyBornOutput {
    model: ModelKind,
    samples: u64,
    quad_tol: f64,
    z_max: f64,
    pass: bool,
    max_quadrature_error: Option<f64>,
    max_abs_z: f64,
    cases: Vec<BornCase>,
}

pub fn verify_born(ctx: &Context, a: &VerifyBornArgs) -> CmdResult {
    json_only(ctx, "verify-born")?;
    let model = a.model.build();
    let count = if a.state.is_some() && a.measurement.is_some() {
        1
    } else {
        a.pairs
    };
    let mut cases = Vec::with_capacity(count);
    for (i, (v, m)) in pairs(ctx, PAIRS_BORN, (a.state, a.measurement), count)?
        .into_iter()
        .enumerate()
    {
        let psi = state(v)?;
        let povm = projective_povm_along(m)?;
        let mut rng = child_stream(ctx.seed, Domain::Sampling, i as u64);
        let report = models::verify_born(model.as_ref(), &psi, &povm, a.samples, &mut rng)?;
        cases.push(BornCase {
            state: bloch_of_qubit(&psi)?.vec(),
            measurement: m,
            pass: report.passes(a.quad_tol, a.z_max),
            report,
        });
    }
    let max_quadrature_error = cases
        .iter()
        .filter_map(|c| c.report.max_quadrature_error)
        .reduce(f64::max);
    let max_abs_z = cases
        .iter()
        .map(|c| c.report.max_abs_z())
        .fold(0.0, f64::max);
    let pass = cases.iter().all(|c| c.pass);
    let out = VerifyBornOutput {
        model: model.kind(),
        samples: a.samples,
        quad_tol: a.quad_tol,
        z_max: a.z_max,
        pass,
        max_quadrature_error,
        max_abs_z,
        cases,
    };
    Ok(Outcome {
        summary: format!(
            "verify-born: {} ({} pairs, max quadrature error {}, max |z| {:.2})",
            if pass { "PASS" } else { "FAIL" },
            out.cases.len(),
            fmt_opt(max_quadrature_error),
            max_abs_z
        ),
        report: envelope(ctx, "verify-born", &out)?,
        passed: pass,
    })
}

#[derive(Serialize)]
struct OverlapOutput {
    model: ModelKind,
    state_a: Vec3,
    state_b: Vec3,
    bloch_angle: f64,
    overlap: OverlapReport,
    /// Closed form, for the KS model only.
    analytic: Option<f64>,
}

/// Rotation of `v` by `angle` towards a direction orthogonal to it.
fn at_angle(v: Vec3, w: Vec3, angle: f64) -> Vec3 {
    v * angle.cos() + w * angle.sin()
}

pub fn overlap(ctx: &Context, a: &OverlapArgs) -> CmdResult {
    json_only(ctx, "overlap")?;
    let model = a.model.build();
    let (va, vb) = match (a.state_a, a.state_b, a.angle) {
        (Some(x), Some(y), _) => (x, y),
        (_, _, Some(angle)) => (Vec3::Z, at_angle(Vec3::Z, Vec3::X, angle)),
        _ => return Err("give --angle or both --state-a and --state-b".into()),
    };
    let (psi, other) = (state(va)?, state(vb)?);
    let report = models::overlap(model.as_ref(), &psi, &other, a.resolution)?;
    let analytic = match model.kind() {
        ModelKind::KochenSpecker => Some(ks_overlap_analytic(&psi, &other)?.omega),
        _ => None,
    };
    let out = OverlapOutput {
        model: model.kind(),
        state_a: bloch_of_qubit(&psi)?.vec(),
        state_b: bloch_of_qubit(&other)?.vec(),
        bloch_angle: va.angle_to(&vb),
        overlap: report,
        analytic,
    };
    Ok(Outcome {
        summary: format!(
            "overlap: ω = {:.6} ({}, error estimate {:.1e})",
            out.overlap.omega,
            serde_json::to_value(out.overlap.method)?
                .as_str()
                .unwrap_or("?"),
            out.overlap.error_estimate
        ),
        report: envelope(ctx, "overlap", &out)?,
        passed: true,
    })
}

#[derive(Serialize)]
struct PairDescription {
    state_a: Vec3,
    state_b: Vec3,
    bloch_angle: f64,
}

#[derive(Serialize)]
struct ClassifyOutput {
    model: ModelKind,
    pairs: Vec<PairDescription>,
    classification: Classification,
}

pub fn classify(ctx: &Context, a: &ClassifyArgs) -> CmdResult {
    json_only(ctx, "classify")?;
    let model = a.model.build();
    let raw = pairs(ctx, PAIRS_CLASSIFY, (None, None), a.pairs)?;
    let mut described = Vec::with_capacity(raw.len());
    let mut states = Vec::with_capacity(raw.len());
    for (v, w) in raw {
        let w = match a.angle {
            Some(angle) => {
                let perp = (w - v * v.dot(&w))
                    .normalized()
                    .unwrap_or_else(|| v.orthonormal_frame().0);
                at_angle(v, perp, angle)
            }
            None => w,
        };
        let (psi, other) = (state(v)?, state(w)?);
        described.push(PairDescription {
            state_a: v,
            state_b: w,
            bloch_angle: v.angle_to(&w),
        });
        states.push((psi, other));
    }
    let classification = classify_pairs(model.as_ref(), &states, a.eps_onto, a.resolution)?;
    let max_omega = classification
        .overlaps
        .iter()
        .map(|o| o.omega)
        .fold(0.0, f64::max);
    let out = ClassifyOutput {
        model: model.kind(),
        pairs: described,
        classification,
    };
    Ok(Outcome {
        summary: format!(
            "classify: {} over {} pairs (max ω {:.6})",
            serde_json::to_value(out.classification.verdict)?
                .as_str()
                .unwrap_or("?"),
            out.pairs.len(),
            max_omega
        ),
        report: envelope(ctx, "classify", &out)?,
        passed: true,
    })
}

#[derive(Serialize)]
struct CapacityOutput {
    model: ModelKind,
    n_in: usize,
    n_out: usize,
    tol: f64,
    max_row_distortion: f64,
    uniform_prior_bits: f64,
    oneshot_upper_bound_bits: f64,
    result: CapacityResult,
}

pub fn capacity(ctx: &Context, a: &CapacityArgs) -> CmdResult {
    json_only(ctx, "capacity")?;
    let model = a.model.build();
    let channel = discretize_channel(model.as_ref(), a.n_in, a.n_out)?;
    if let Some(path) = &a.matrix_csv {
        channel.write_csv(BufWriter::new(File::create(path)?))?;
    }
    let result = blahut_arimoto(&channel, a.tol, a.max_iter)?;
    let uniform = vec![1.0 / a.n_in as f64; a.n_in];
    let out = CapacityOutput {
        model: model.kind(),
        n_in: a.n_in,
        n_out: a.n_out,
        tol: a.tol,
        max_row_distortion: channel.max_row_distortion(),
        uniform_prior_bits: mutual_information(&channel, &uniform)?,
        oneshot_upper_bound_bits: oneshot_upper_bound(result.capacity_bits)?,
        result,
    };
    let converged = out.result.converged;
    Ok(Outcome {
        summary: format!(
            "capacity: {:.6} bits, gap {:.1e} ({})",
            out.result.capacity_bits,
            out.result.gap_bits,
            if converged {
                "converged"
            } else {
                "NOT converged"
            }
        ),
        report: envelope(ctx, "capacity", &out)?,
        passed: converged,
    })
}

fn write_transcripts<'a>(
    path: &std::path::Path,
    rows: impl Iterator<Item = (usize, &'a Transcript)>,
) -> Result<(), Box<dyn Error>> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["pair", "round", "index", "bits", "outcome"])?;
    for (pair, t) in rows {
        w.write_record([
            pair.to_string(),
            t.round.to_string(),
            t.accepted_index.to_string(),
            t.bits_sent.to_string(),
            t.outcome.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SimulationCase {
    state: Vec3,
    measurement: Vec3,
    seed: u64,
    pass: bool,
    report: SimulationReport,
}

#[derive(Serialize)]
struct SimulateOutput {
    model: ModelKind,
    rounds: u64,
    p_min: f64,
    z_max: f64,
    pass: bool,
    min_p_value: f64,
    cases: Vec<SimulationCase>,
}

pub fn simulate(ctx: &Context, a: &SimulateArgs) -> CmdResult {
    json_only(ctx, "simulate")?;
    let model = a.model.build();
    let count = if a.state.is_some() && a.measurement.is_some() {
        1
    } else {
        a.pairs
    };
    let mut cases = Vec::with_capacity(count);
    let mut kept = Vec::new();
    for (i, (v, m)) in pairs(ctx, PAIRS_SIMULATE, (a.state, a.measurement), count)?
        .into_iter()
        .enumerate()
    {
        let psi = state(v)?;
        let povm = projective_povm_along(m)?;
        let seed = derive_seed(ctx.seed, Domain::Shared, i as u64);
        let (report, transcripts) = simulate_plain(
            model.as_ref(),
            &psi,
            &povm,
            a.rounds,
            seed,
            a.transcript.is_some(),
        )?;
        if let Some(t) = transcripts {
            kept.push(t);
        }
        cases.push(SimulationCase {
            state: bloch_of_qubit(&psi)?.vec(),
            measurement: m,
            seed,
            pass: report.chi_square.p_value > a.p_min && report.max_abs_z() <= a.z_max,
            report,
        });
    }
    if let Some(path) = &a.transcript {
        write_transcripts(
            path,
            kept.iter()
                .enumerate()
                .flat_map(|(i, ts)| ts.iter().map(move |t| (i, t))),
        )?;
    }
    let pass = cases.iter().all(|c| c.pass);
    let min_p_value = cases
        .iter()
        .map(|c| c.report.chi_square.p_value)
        .fold(1.0, f64::min);
    let out = SimulateOutput {
        model: model.kind(),
        rounds: a.rounds,
        p_min: a.p_min,
        z_max: a.z_max,
        pass,
        min_p_value,
        cases,
    };
    Ok(Outcome {
        summary: format!(
            "simulate: {} ({} pairs, min chi-square p {:.3e})",
            if pass { "PASS" } else { "FAIL" },
            out.cases.len(),
            min_p_value
        ),
        report: envelope(ctx, "simulate", &out)?,
        passed: pass,
    })
}

#[derive(Serialize)]
struct CostOutput {
    model: ModelKind,
    measurement: Vec3,
    /// Certified capacity of the channel behind the greedy protocol.
    capacity: Option<CapacityResult>,
    oneshot_upper_bound_bits: Option<f64>,
    lemma_ordering_holds: Option<bool>,
    report: CostReport,
}

pub fn cost(ctx: &Context, a: &CostArgs) -> CmdResult {
    json_only(ctx, "cost")?;
    let model = a.model.build();
    let povm = projective_povm_along(a.measurement)?;
    let options = CostOptions {
        rounds: a.rounds,
        seed: ctx.seed,
        states: a.states,
    };
    let (report, capacity) = match a.protocol {
        ProtocolArg::Plain => (estimate_cost_plain(model.as_ref(), &povm, &options)?, None),
        ProtocolArg::Greedy => {
            let channel = discretize_channel(model.as_ref(), a.n_in, a.n_out)?;
            let cap = blahut_arimoto(&channel, a.tol, onticlab_core::capacity::DEFAULT_MAX_ITER)?;
            let table = ResponseTable::new(model.as_ref(), &channel, &povm)?;
            let sim = GreedySimulator::new(&channel, &cap.prior, table)?;
            let report = estimate_cost_greedy(&sim, &povm, &options)?;
            if let Some(path) = &a.transcript {
                let shared = sim.shared_randomness(ctx.seed)?;
                let n_in = channel.n_in() as u64;
                let rows = (0..a.rounds)
                    .map(|r| {
                        sim.run((r % n_in) as usize, &shared, r)
                            .map(|t| ((r % n_in) as usize, t))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                write_transcripts(path, rows.iter().map(|(i, t)| (*i, t)))?;
            }
            (report, Some(cap))
        }
    };
    if a.protocol == ProtocolArg::Plain {
        if let Some(path) = &a.transcript {
            write_plain_cost_transcripts(ctx, a, model.as_ref(), &povm, path)?;
        }
    }
    let lemma = report.lemma_ordering_holds();
    let out = CostOutput {
        model: model.kind(),
        measurement: a.measurement,
        oneshot_upper_bound_bits: capacity
            .as_ref()
            .map(|c| oneshot_upper_bound(c.capacity_bits))
            .transpose()?,
        capacity,
        lemma_ordering_holds: lemma,
        report,
    };
    for w in &out.report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(Outcome {
        summary: format!(
            "cost: average {:.4} bits, max over states {:.4}, mean trials {:.3}, information-cost ordering {}",
            out.report.average_bits,
            out.report.max_state_average_bits,
            out.report.mean_trials,
            match lemma {
                Some(true) => "holds",
                Some(false) => "VIOLATED",
                None => "not evaluated",
            }
        ),
        report: envelope(ctx, "cost", &out)?,
        passed: lemma != Some(false),
    })
}

/// Replays the plain cost run round by round for the transcript dump.
fn write_plain_cost_transcripts(
    ctx: &Context,
    a: &CostArgs,
    model: &dyn onticlab_core::OntologicalModel,
    povm: &onticlab_core::Povm,
    path: &std::path::Path,
) -> Result<(), Box<dyn Error>> {
    use onticlab_core::protocol::{PlainSimulator, SharedRandomness, UniformSphereProposal};
    let mut rng = child_stream(ctx.seed, Domain::States, 0);
    let states = (0..a.states)
        .map(|_| onticlab_core::quantum::haar_random_state(1, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    let sims = states
        .iter()
        .map(|psi| PlainSimulator::new(model, psi, povm))
        .collect::<Result<Vec<_>, _>>()?;
    let shared = SharedRandomness::new(ctx.seed, UniformSphereProposal);
    let count = a.states as u64;
    let rows = (0..a.rounds)
        .map(|r| {
            let node = (r % count) as usize;
            sims[node].run(&shared, r).map(|t| (node, t))
        })
        .collect::<Result<Vec<_>, _>>()?;
    write_transcripts(path, rows.iter().map(|(i, t)| (*i, t)))
}

#[derive(Serialize)]
struct BoundsOutput {
    collapse: CollapseReport,
    cap_check: Option<CapFractionEstimate>,
}

pub fn bounds(ctx: &Context, a: &BoundsArgs) -> CmdResult {
    let growth = match (a.a, a.b, a.c) {
        (Some(x), Some(y), Some(z)) => GrowthModel::new("custom", x, y, z)?,
        _ => GrowthModel::preset(&a.growth)?,
    };
    let ns: Vec<u32> = a.n.clone().collect();
    let thetas = linspace(a.theta, a.theta_steps);
    let collapse = collapse_verdict(&growth, &thetas, &ns)?;
    let verdict = collapse.verdict.as_str();
    let format = ctx.format.unwrap_or(Format::Csv);
    let (report, cap_summary) = match format {
        Format::Csv => {
            if a.haar_pairs.is_some() {
                return Err("--haar-pairs needs --format json".into());
            }
            let mut buf = Vec::new();
            write_bounds_csv(&collapse.evaluations, &mut buf)?;
            (String::from_utf8(buf)?, String::new())
        }
        Format::Json => {
            let cap_check = a
                .haar_pairs
                .map(|pairs| haar_cap_fraction(a.haar_n, a.haar_theta, pairs, ctx.seed))
                .transpose()?;
            let cap_summary = cap_check.as_ref().map_or_else(String::new, |c| {
                format!(
                    "; Haar cap fraction {:.5} ± {:.5} (sin-exponent {:.4}, Fubini-Study {:.4})",
                    c.fraction, c.std_error, c.sin_exponent, c.fubini_study
                )
            });
            (
                envelope(
                    ctx,
                    "bounds",
                    &BoundsOutput {
                        collapse,
                        cap_check,
                    },
                )?,
                cap_summary,
            )
        }
    };
    Ok(Outcome {
        summary: format!("bounds: growth {} → {verdict}{cap_summary}", growth.name),
        report,
        passed: true,
    })
}

pub fn equipartition(ctx: &Context, a: &EquipartitionArgs) -> CmdResult {
    json_only(ctx, "equipartition")?;
    let model = a.model.build();
    let psi = state(a.state)?;
    let mut rng = child_stream(ctx.seed, Domain::Sampling, 0);
    let report: EquipartitionReport =
        equipartition_diagnostic(model.as_ref(), &psi, a.samples, &mut rng)?;
    Ok(Outcome {
        summary: format!(
            "equipartition: mean ln ρ {}, sd {}",
            fmt_opt(report.mean_log_density),
            fmt_opt(report.std_log_density)
        ),
        report: envelope(ctx, "equipartition", &report)?,
        passed: true,
    })
}
