//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any criterion fails.

use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use bdris::circuit::{impedance_from_scattering, scattering_from_capacitances, scattering_from_impedance};
use bdris::experiment::{Experiment, ExperimentConfig, FrequencyGrid, ResultTable};
use bdris::linalg::{c, vec, vech, vech_len};
use bdris::metrics::{column_norms, relative_leakage};
use bdris::optimizer::{
    solve_fc_blocked, solve_fc_direct, solve_gc_blocked, solve_gc_direct, stack_fc, FwConfig, GroupAssignment,
    ObjectiveWeights,
};
use bdris::scenario::{effective_channels, sample_channels, stream, zf_precoder, Purpose};
use bdris::sim::{AggregateResult, Estimate};
use bdris::*;
use bdris_cli::run_experiment;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = fn() -> Outcome;

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rng(tag: u32) -> ChaCha8Rng {
    stream(SEED, 0, Purpose::Custom(tag), 0)
}

fn cn(r: &mut impl Rng) -> c64 {
    let (a, b): (f64, f64) = (StandardNormal.sample(r), StandardNormal.sample(r));
    c(a, b) * std::f64::consts::FRAC_1_SQRT_2
}

fn random_symmetric(r: &mut impl Rng, d: usize) -> CMatrix {
    let a = CMatrix::from_fn(d, d, |_, _| cn(r));
    (&a + a.transpose()) * c(0.5, 0.0)
}

fn within(elapsed: Duration, limit: f64) -> (bool, String) {
    let s = elapsed.as_secs_f64();
    (s < limit, format!("{s:.2} s (limit {limit} s)"))
}

fn duplication_identity() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    let mut binary = true;
    for d in 2..=10 {
        let dd = DuplicationMatrix::new(d).unwrap().to_dense();
        binary &= dd.iter().all(|x| *x == 0.0 || *x == 1.0);
        let dc = dd.map(|x| c(x, 0.0));
        for _ in 0..100 {
            let a = random_symmetric(&mut r, d);
            let err = (&dc * vech(&a).unwrap() - vec(&a)).camax();
            worst = worst.max(err);
        }
    }
    let (fast, t) = within(start.elapsed(), 1.0);
    outcome(binary && worst <= 1e-14 && fast, format!("0/1 entries: {binary}, max error {worst:.1e}, {t}"))
}

fn duplication_norm_bounds() -> Outcome {
    let start = Instant::now();
    let mut r = rng(2);
    let mut violations = 0;
    let (mut hi, mut lo) = (0.0f64, f64::INFINITY);
    for d in 2..=10 {
        let dd = DuplicationMatrix::new(d).unwrap();
        for _ in 0..10_000 {
            let th = CVector::from_fn(vech_len(d), |_, _| cn(&mut r));
            let ratio = dd.apply(&th).unwrap().norm() / th.norm();
            hi = hi.max(ratio);
            lo = lo.min(ratio);
            if !(ratio < 2f64.sqrt() && ratio / (d as f64).sqrt() <= 1.0) {
                violations += 1;
            }
        }
    }
    let (fast, t) = within(start.elapsed(), 5.0);
    outcome(violations == 0 && fast, format!("violations {violations} of 90000, ratio range [{lo:.3}, {hi:.3}], {t}"))
}

fn impedance_roundtrip() -> Outcome {
    let start = Instant::now();
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let d = 2 + i % 9;
        let mut t = random_symmetric(&mut r, d);
        let rho = t.clone().eigenvalues().unwrap().iter().map(|x| x.norm()).fold(0.0, f64::max);
        t *= c(r.random_range(0.05..0.9) / rho, 0.0);
        let z = impedance_from_scattering(&t, 50.0).unwrap();
        let back = scattering_from_impedance(&z, 50.0).unwrap();
        worst = worst.max((back - t).camax());
    }
    let (fast, t) = within(start.elapsed(), 2.0);
    outcome(worst < 1e-10 && fast, format!("max error {worst:.1e}, {t}"))
}

fn lossless_unitarity() -> Outcome {
    let start = Instant::now();
    let mut r = rng(4);
    let params = CircuitParams::default().lossless();
    let sr = CapacitanceRange::new(0.1e-12, 2e-12).unwrap();
    let ir = CapacitanceRange::new(0.001e-12, 0.6e-12).unwrap();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for &(d, g) in &[(1, 1), (2, 1), (4, 1), (4, 2), (8, 1), (8, 4), (12, 3), (16, 1), (16, 2), (16, 16)] {
        for _ in 0..10 {
            let plan = CapacitancePlan::random(RisTopology::new(d, g).unwrap(), sr, ir, &mut r);
            for f in [4e9, 7e9, 12e9] {
                let s = scattering_from_capacitances(&plan, f, &params).unwrap();
                for b in 0..g {
                    let blk = s.block(b);
                    let n = blk.nrows();
                    worst = worst.max((&blk * blk.adjoint() - CMatrix::identity(n, n)).norm());
                    cases += 1;
                }
            }
        }
    }
    let (fast, t) = within(start.elapsed(), 5.0);
    outcome(worst < 1e-7 && fast, format!("{cases} blocks, max ‖ΘΘᴴ - I‖_F {worst:.1e}, {t}"))
}

fn instance(r: &mut impl Rng, trial: u64, d: usize, m: usize) -> (ChannelSet, ObjectiveWeights) {
    let mut s = NetworkScenario::two_bs_default();
    s.antennas = m;
    let ch = sample_channels(&s, d, &mut stream(SEED, trial, Purpose::Channels, 0)).unwrap();
    let mu0: f64 = r.random_range(0.05..0.95);
    let w = ObjectiveWeights::with_even_users(vec![mu0, 1.0 - mu0], &ch);
    (ch, w)
}

fn closed_form_optimality() -> Outcome {
    let start = Instant::now();
    let mut r = rng(5);
    let mut beaten = 0;
    let mut worst_rel: f64 = 0.0;
    for t in 0..50 {
        let d = r.random_range(2..=10);
        let m = r.random_range(2..=4);
        let (ch, w) = instance(&mut r, t, d, m);
        let sol = solve_fc_blocked(&ch, &w).unwrap();
        let (rr, _) = stack_fc(&ch, &w).unwrap();
        let smax = rr.singular_values().max();
        worst_rel = worst_rel.max((sol.objective - smax * smax).abs() / (smax * smax));
        let mut best: f64 = 0.0;
        for _ in 0..10_000 {
            let mut th = CVector::from_fn(rr.ncols(), |_, _| cn(&mut r));
            th /= c(th.norm(), 0.0);
            best = best.max((&rr * th).norm_squared());
        }
        if best > sol.objective {
            beaten += 1;
        }
    }
    let (fast, t) = within(start.elapsed(), 30.0);
    outcome(
        beaten == 0 && worst_rel < 1e-9 && fast,
        format!("random search beat it in {beaten} of 50, max |obj - σ²|/σ² {worst_rel:.1e}, {t}"),
    )
}

fn frank_wolfe_matches_closed_form() -> Outcome {
    let start = Instant::now();
    let mut r = rng(6);
    let fw = FwConfig { iterations: 500 };
    let (mut fc_worst, mut gc_worst) = (0.0f64, 0.0f64);
    for t in 0..50 {
        let d = 2 * r.random_range(1..=5);
        let m = r.random_range(2..=4);
        let (ch, w) = instance(&mut r, t, d, m);
        let a = solve_fc_blocked(&ch, &w).unwrap().objective;
        let b = solve_fc_direct(&ch, &w, &fw).unwrap().objective;
        fc_worst = fc_worst.max((b - a).abs() / a);

        let topo = RisTopology::new(d, 2).unwrap();
        let asg = GroupAssignment::contiguous(2, &[(0, 7.4e9), (1, 8e9)]).unwrap();
        let obj = |s: bdris::optimizer::GroupedSolution| s.parts.iter().map(|p| p.objective).sum::<f64>();
        let a = obj(solve_gc_blocked(&ch, &w, &asg, topo).unwrap());
        let b = obj(solve_gc_direct(&ch, &w, &asg, topo, &fw).unwrap());
        gc_worst = gc_worst.max((b - a).abs() / a);
    }
    let (fast, t) = within(start.elapsed(), 60.0);
    outcome(
        fc_worst < 1e-2 && gc_worst < 1e-2 && fast,
        format!("worst relative gap fully {:.2}%, group {:.2}% (limit 1%), {t}", 100.0 * fc_worst, 100.0 * gc_worst),
    )
}

fn zero_forcing() -> Outcome {
    let start = Instant::now();
    let s = NetworkScenario::two_bs_default();
    let sr = CapacitanceRange::new(0.1e-12, 2e-12).unwrap();
    let ir = CapacitanceRange::new(0.001e-12, 0.6e-12).unwrap();
    let params = CircuitParams::default();
    let (mut leak, mut norm_err) = (0.0f64, 0.0f64);
    for t in 0..1000 {
        let ch = sample_channels(&s, 8, &mut stream(SEED, t, Purpose::Channels, 0)).unwrap();
        let plan = CapacitancePlan::random(RisTopology::fully(8).unwrap(), sr, ir, &mut stream(SEED, t, Purpose::Baseline, 0));
        let b = (t % 2) as usize;
        let theta = scattering_from_capacitances(&plan, s.frequencies[b], &params).unwrap().theta;
        let e = effective_channels(&ch.bs[b], &theta).unwrap();
        let p = zf_precoder(&e, b).unwrap();
        leak = leak.max(relative_leakage(&e, &p));
        norm_err = column_norms(&p).iter().map(|n| (n.re - 1.0).abs()).fold(norm_err, f64::max);
    }
    let (fast, t) = within(start.elapsed(), 10.0);
    outcome(leak < 1e-8 && norm_err <= 1e-10 && fast, format!("max leakage {leak:.1e}, max |‖p‖ - 1| {norm_err:.1e}, {t}"))
}

fn table<'a>(tables: &'a [ResultTable], name: &str) -> &'a AggregateResult {
    &tables.iter().find(|t| t.name == name).unwrap_or_else(|| panic!("no table {name}")).result
}

fn two_stderr_above(a: &Estimate, b: &Estimate) -> bool {
    a.mean - b.mean >= 2.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt()
}

fn config(trials: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.simulation.trials = trials;
    c
}

fn frequency_response() -> Outcome {
    let mut c = config(200);
    c.freq_response.elements = vec![100];
    let tables = c.run(Experiment::FreqResponse).unwrap();
    let res = table(&tables, "freq-response-d100");
    let fc = res.curve("D=100", Architecture::FullyConnected, "received_power_mw");
    let sc = res.curve("D=100", Architecture::SingleConnected, "received_power_mw");
    let (f_peak, peak) = fc.iter().map(|(x, e)| (*x, e.mean)).fold((0.0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
    let in_band = (0.08..=0.16).contains(&peak);
    let flat_min = fc.iter().filter(|(x, _)| (4.5..=11.5).contains(x)).map(|(_, e)| e.mean / peak).fold(f64::INFINITY, f64::min);
    let mut above = 0;
    let mut points = 0;
    for ((x, a), (_, b)) in fc.iter().zip(&sc) {
        if (4.0..=12.0).contains(x) {
            points += 1;
            above += usize::from(two_stderr_above(a, b));
        }
    }
    outcome(
        in_band && flat_min >= 0.85 && above == points,
        format!(
            "fully peak {peak:.4} mW at {f_peak} GHz (band [0.08, 0.16]), min/peak over 4.5-11.5 GHz {flat_min:.3} (need 0.85), fully > single by 2 stderr at {above}/{points} points"
        ),
    )
}

fn target_shift() -> Outcome {
    let mut c = config(200);
    c.target_shift.targets_ghz = vec![7.4];
    c.simulation.architectures = vec![Architecture::FullyConnected, Architecture::SingleConnected];
    let step = c.target_shift.grid.step_ghz;
    let tables = c.run(Experiment::TargetShift).unwrap();
    let res = table(&tables, "target-shift");
    let at = |arch, x: f64| res.find("target=7.4GHz", arch, "received_power_mw", x).unwrap().mean;
    let argmax = |arch| {
        res.curve("target=7.4GHz", arch, "received_power_mw")
            .into_iter()
            .fold((0.0, f64::MIN), |a, (x, e)| if e.mean > a.1 { (x, e.mean) } else { a })
            .0
    };
    let peaks_ok = [Architecture::FullyConnected, Architecture::SingleConnected]
        .iter()
        .all(|&a| (argmax(a) - 7.4).abs() <= step + 1e-9);
    let drop = |arch, x| 1.0 - at(arch, x) / at(arch, 7.4);
    let sides = [6.4, 8.4];
    let fc_drop: Vec<f64> = sides.iter().map(|&x| drop(Architecture::FullyConnected, x)).collect();
    let sc_drop: Vec<f64> = sides.iter().map(|&x| drop(Architecture::SingleConnected, x)).collect();
    let vulnerable = fc_drop.iter().zip(&sc_drop).all(|(f, s)| f > s);
    outcome(
        peaks_ok && vulnerable,
        format!(
            "argmax fully {} GHz, single {} GHz (target 7.4, step {step}); relative drop at 6.4/8.4 GHz fully {:.3}/{:.3}, single {:.3}/{:.3}",
            argmax(Architecture::FullyConnected),
            argmax(Architecture::SingleConnected),
            fc_drop[0],
            fc_drop[1],
            sc_drop[0],
            sc_drop[1]
        ),
    )
}

fn interference_trend() -> Outcome {
    let c = config(200);
    let tables = c.run(Experiment::Interference).unwrap();
    let deg = |pos: &str, arch, d: f64| {
        let name = format!("interference-ris-{}", pos.replace(',', "-"));
        table(&tables, &name).find(&format!("ris=({pos})"), arch, "se_degradation", d).unwrap().mean
    };
    let positions = ["20,20", "40,20", "60,20"];
    let mut monotone = true;
    for &d in &c.interference.elements {
        let v: Vec<f64> = positions.iter().map(|p| deg(p, Architecture::FullyConnected, d as f64)).collect();
        monotone &= v.windows(2).all(|w| w[1] > w[0]);
    }
    let gap = deg("60,20", Architecture::FullyConnected, 80.0);
    let sc = deg("60,20", Architecture::SingleConnected, 80.0);
    let trend: Vec<String> = positions.iter().map(|p| format!("{:.2}", deg(p, Architecture::FullyConnected, 80.0))).collect();
    outcome(
        monotone && (2.0..=6.0).contains(&gap) && gap >= sc,
        format!(
            "fully degradation strictly increasing toward BS 2 at every D: {monotone} (D=80: {}), gap at (60,20) D=80 {gap:.2} bits/s/Hz (band [2, 6]), single {sc:.2}",
            trend.join(" < ")
        ),
    )
}

fn architecture_ordering() -> Outcome {
    let mut c = config(200);
    c.power_sweep.weight_sets = vec![vec![0.3, 0.7]];
    let tables = c.run(Experiment::PerBsPower).unwrap();
    let res = table(&tables, "per-bs-power-mu-0.3-0.7");
    let mut failures = Vec::new();
    for &d in &c.power_sweep.elements {
        for b in 1..=2 {
            let m = format!("bs{b}_sum_power_mw");
            let get = |a| *res.find("mu=0.3/0.7", a, &m, d as f64).unwrap();
            let (f, g, s) = (get(Architecture::FullyConnected), get(Architecture::GroupConnected), get(Architecture::SingleConnected));
            let ordered = if d >= 60 {
                two_stderr_above(&f, &g) && two_stderr_above(&g, &s)
            } else {
                f.mean >= g.mean && g.mean >= s.mean
            };
            if !ordered {
                failures.push(format!("D={d} BS{b}: {:.3e}/{:.3e}/{:.3e}", f.mean, g.mean, s.mean));
            }
        }
    }
    let detail = if failures.is_empty() {
        "fully ≥ group ≥ single everywhere".to_string()
    } else {
        format!("violations (fully/group/single mW): {}", failures.join("; "))
    };
    outcome(failures.is_empty(), detail)
}

fn determinism() -> Outcome {
    let mut c = config(3);
    c.scenario.antennas = 4;
    c.freq_response.elements = vec![4];
    c.freq_response.grid = FrequencyGrid { start_ghz: 6.0, stop_ghz: 9.0, step_ghz: 1.0 };
    c.target_shift.elements = 4;
    c.target_shift.grid = FrequencyGrid { start_ghz: 7.0, stop_ghz: 8.0, step_ghz: 0.5 };
    c.power_sweep.elements = vec![4, 8];
    c.interference.elements = vec![4, 8];
    c.optimization.fw_iterations = 50;
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut files = 0;
    let mut differing = Vec::new();
    for e in Experiment::ALL {
        let fa = run_experiment(e, &c, a.path()).unwrap();
        let fb = run_experiment(e, &c, b.path()).unwrap();
        for (x, y) in fa.iter().zip(&fb) {
            files += 1;
            if fs::read(x).unwrap() != fs::read(y).unwrap() {
                differing.push(x.file_name().unwrap().to_string_lossy().into_owned());
            }
        }
    }
    outcome(differing.is_empty() && files > 0, format!("{files} CSV files compared, differing: {differing:?}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 12] = [
        ("duplication identity", duplication_identity),
        ("duplication norm bounds", duplication_norm_bounds),
        ("scattering/impedance roundtrip", impedance_roundtrip),
        ("lossless unitarity", lossless_unitarity),
        ("closed-form optimality", closed_form_optimality),
        ("Frank-Wolfe vs closed form", frank_wolfe_matches_closed_form),
        ("zero-forcing", zero_forcing),
        ("frequency response", frequency_response),
        ("target shift", target_shift),
        ("interference trend", interference_trend),
        ("architecture ordering", architecture_ordering),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "criterion {:>2} {:<32} {}  {} [{:.1} s]",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
