//! Acceptance checks. Prints one PASS/FAIL line per check and exits
//! nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splitbound::config::bundled;
use splitbound::density::{
    CappedGaussianLowerBound, Density, DensityBound, ExpressionLowerBound, GaussianLowerBound, MixtureLowerBound,
    ParameterEnvelopeLowerBound,
};
use splitbound::engine::{resume, run, BoundsReport, EngineSettings, EngineState, Problem, StopSpec};
use splitbound::expr::{parse_expression, Expr, Model};
use splitbound::interval::{Interval, PropagationSettings};
use splitbound::montecarlo::mc_check;
use splitbound::probbound::{prob_lower_basic, prob_lower_best, prob_lower_convex, prob_lower_monotone, Direction};
use splitbound::region::{classify, Status};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn history_monotone(r: &BoundsReport) -> bool {
    r.history.windows(2).all(|w| {
        w[1].iteration > w[0].iteration && w[1].lb_pass >= w[0].lb_pass && w[1].lb_fail >= w[0].lb_fail
    }) && r.history.last().is_some_and(|h| h.lb_pass == r.pass[0] && h.lb_fail == r.fail[0])
}

/// Every report produced here, for the monotonicity check.
struct Runs(Vec<BoundsReport>);

impl Runs {
    fn run(&mut self, p: Problem, s: EngineSettings, stop: &StopSpec) -> (EngineState, BoundsReport) {
        let out = run(p, s, stop).expect("engine runs");
        self.0.push(out.1.clone());
        out
    }
}

/// Standard normal cdf by its Taylor series about zero.
fn phi(x: f64) -> f64 {
    let (mut term, mut sum, mut k) = (x, x, 0.0);
    while term.abs() > 1e-18 {
        k += 1.0;
        term *= x * x / (2.0 * k + 1.0);
        sum += term;
    }
    0.5 + sum * (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn pvr_gaussian(runs: &mut Runs) -> Outcome {
    let c = bundled("pvr-gaussian").unwrap();
    let p = c.build().unwrap();
    let t = Instant::now();
    let (_, r) = runs.run(p.clone(), c.engine.clone(), &c.stop);
    let secs = t.elapsed().as_secs_f64();
    let mc = mc_check(&p, 1_000_000, 2024).unwrap();
    let fail = 1.0 - mc.estimate;
    let slack = 4.0 * mc.std_error;
    let contains = r.fail[0] - slack <= fail && fail <= r.fail[1] + slack;
    let minimum = r.fail[0] >= 0.01 && r.fail[1] <= 0.70;
    let target = r.fail[0] >= 0.04 && r.fail[1] <= 0.57;
    check(
        contains && minimum && target,
        format!(
            "Pr(PVR > 1.62) in [{:.4}, {:.4}] after {} iterations ({secs:.1} s); Monte Carlo {fail:.4} +- {:.4}",
            r.fail[0], r.fail[1], r.iterations, mc.std_error
        ),
    )
}

fn gap_floors(runs: &mut Runs) -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, reference) in [("pvr-capped", [0.04, 0.79]), ("pvr-envelope", [0.01, 0.76])] {
        let c = bundled(name).unwrap();
        let p = c.build().unwrap();
        let n = p.density().mass_fraction().value;
        let (_, r) = runs.run(p, c.engine.clone(), &c.stop);
        let floor = 1.0 - n - 1e-6;
        let gaps_ok = r.gap >= floor && r.history.iter().all(|h| 1.0 - h.lb_pass - h.lb_fail >= floor);
        let inside = r.fail[0] >= reference[0] - 0.05 && r.fail[1] <= reference[1] + 0.05;
        ok &= gaps_ok && inside;
        notes.push(format!(
            "{name}: n = {n:.3}, gap {:.3}, Pr(PVR > 1.62) in [{:.3}, {:.3}]",
            r.gap, r.fail[0], r.fail[1]
        ));
    }
    check(ok, notes.join("; "))
}

fn worked_examples() -> Outcome {
    let names = ["x".to_string()];
    let flat = |support: f64| {
        Density::from(ExpressionLowerBound::new(parse_expression("0.5", &names).unwrap(), vec![Interval::new(0.0, support)]).unwrap())
    };
    // 1 on [0, 0.5] and 0.5 on (0.5, 1]
    let step = MixtureLowerBound::new(vec![(1.0, flat(1.0)), (1.0, flat(0.5))]).unwrap();
    let before = prob_lower_basic(&step, &[Interval::new(0.0, 1.0)]);
    let after = prob_lower_basic(&step, &[Interval::new(0.0, 0.5)]) + prob_lower_basic(&step, &[Interval::new(0.5, 1.0)]);

    let m = Model::parse("input a in [0, 2]\ninput b in [0, 2]\nab = a*b\ncriterion: ab < 3\n").unwrap();
    let s = PropagationSettings::default();
    let x = classify(&[Interval::new(0.0, 1.0), Interval::new(0.0, 2.0)], &m, m.criterion().unwrap(), &s).unwrap().0;
    let y = classify(&[Interval::new(1.0, 2.0), Interval::new(0.0, 2.0)], &m, m.criterion().unwrap(), &s).unwrap().0;
    check(
        before == 0.5 && after == 0.75 && x == Status::MarkedPass && y == Status::Unsure,
        format!("step density {before} then {after}; X {x:?}, Y {y:?}"),
    )
}

fn pvr_checkpoints(runs: &mut Runs) -> Outcome {
    let c = bundled("pvr-gaussian").unwrap();
    let p = c.build().unwrap();
    let m = p.model();
    let s = PropagationSettings::default();
    let (_, store) = classify(m.input_ranges(), m, p.criterion(), &s).unwrap();
    let first = store.get(m.index_of("PVR").unwrap());

    let (state, _) = runs.run(p.clone(), c.engine.clone(), &StopSpec::iterations(2));
    let co = m.input_names().iter().position(|n| n == "CO").unwrap();
    let mut halves: Vec<Interval> = state.regions.iter().map(|r| r.bounds[co]).collect();
    halves.sort_by(|a, b| a.lo().total_cmp(&b.lo()));
    let split_on_co = halves == [Interval::new(1.0, 50.5), Interval::new(50.5, 100.0)]
        && state.regions.iter().all(|r| (0..3).all(|k| k == co || r.bounds[k] == m.input_ranges()[k]));

    let b = [Interval::new(20.75, 25.47), Interval::new(15.95, 17.32), Interval::new(6.41, 7.19)];
    let (status, _) = classify(&b, m, p.criterion(), &s).unwrap();
    let single = prob_lower_best(p.density(), &b).lower;
    // the certificate the search builds for this region by refining it
    let only_box = Problem::new(m.clone(), None, p.density().clone(), Some(vec![b.to_vec()])).unwrap();
    let (_, r) = runs.run(only_box, c.engine.clone(), &StopSpec::iterations(1_000));
    let reached = r.history.iter().find(|h| h.lb_pass >= 0.002).map(|h| h.iteration);
    check(
        first == Interval::new(0.0, 87.0)
            && split_on_co
            && status == Status::MarkedPass
            && r.pass[0] >= 0.002
            && r.fail[0] == 0.0,
        format!(
            "first PVR bounds {first}; first split on CO: {split_on_co}; marked box {status:?}, \
             probability >= {:.4} after refining it {} times (0.002 reached at iteration {reached:?}; unsplit box {single:.5})",
            r.pass[0], r.iterations
        ),
    )
}

fn random_expr(r: &mut ChaCha8Rng, n: usize, depth: u32) -> Expr {
    if depth == 0 || r.random::<f64>() < 0.25 {
        return if r.random::<f64>() < 0.7 {
            Expr::Var(r.random_range(0..n))
        } else {
            Expr::Const(r.random_range(-4i32..=4) as f64 * 0.5)
        };
    }
    let sub = |r: &mut ChaCha8Rng| Box::new(random_expr(r, n, depth - 1));
    match r.random_range(0..6) {
        0 => Expr::Add(sub(r), sub(r)),
        1 => Expr::Sub(sub(r), sub(r)),
        2 => Expr::Mul(sub(r), sub(r)),
        3 => Expr::Pow(sub(r), r.random_range(2..=3)),
        // exp of something bounded, to stay finite over the input box
        4 => Expr::Exp(Box::new(Expr::Div(sub(r), Box::new(Expr::Add(Box::new(Expr::Const(1.0)), Box::new(Expr::Pow(sub(r), 2))))))),
        _ => Expr::Div(sub(r), Box::new(Expr::Add(Box::new(Expr::Const(1.0)), Box::new(Expr::Pow(sub(r), 2))))),
    }
}

fn random_gaussian(r: &mut ChaCha8Rng, n: usize) -> GaussianLowerBound {
    let mean: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
    let sd: Vec<f64> = (0..n).map(|_| r.random_range(0.3..2.0)).collect();
    let mut corr = vec![vec![0.0; n]; n];
    for i in 0..n {
        corr[i][i] = 1.0;
        for j in 0..i {
            // diagonally dominant, hence positive definite
            let rho = r.random_range(-0.45..0.45);
            corr[i][j] = rho;
            corr[j][i] = rho;
        }
    }
    GaussianLowerBound::new(mean, sd, Some(corr)).unwrap()
}

fn random_problem(r: &mut ChaCha8Rng) -> (Problem, String) {
    let n = r.random_range(1..=3);
    let g = random_gaussian(r, n);
    let names = ["x", "y", "z"];
    let mut text = String::new();
    for k in 0..n {
        let (m, s) = (g.mean()[k], g.std_devs()[k]);
        text += &format!("input {} in [{}, {}]\n", names[k], m - 6.0 * s, m + 6.0 * s);
    }
    let e = random_expr(r, n, 3);
    let owned: Vec<String> = names[..n].iter().map(|s| s.to_string()).collect();
    text += &format!("s = {}\n", e.display(&owned));
    // threshold at a random quantile of s under the Gaussian
    let sampler = g.base_member().unwrap();
    let mut values: Vec<f64> =
        sampler.sample(201, r.random()).iter().filter_map(|x| e.eval_point(x).ok()).filter(|v| v.is_finite()).collect();
    values.sort_by(f64::total_cmp);
    let t = values[(r.random_range(0.1..0.9) * values.len() as f64) as usize];
    let op = ["<=", "<", ">=", ">"][r.random_range(0..4)];
    text += &format!("criterion: s {op} {t:?}\n");
    let (density, kind): (Density, &str) = match r.random_range(0..3) {
        0 => (g.into(), "gaussian"),
        1 => (CappedGaussianLowerBound::new(g, None).unwrap().into(), "capped"),
        _ => {
            let k = r.random_range(0..n);
            let mut ranges: Vec<Interval> = g.mean().iter().map(|&m| Interval::point(m)).collect();
            let w = r.random_range(0.05..0.5) * g.std_devs()[k];
            ranges[k] = Interval::new(g.mean()[k] - w, g.mean()[k] + w);
            (ParameterEnvelopeLowerBound::new(&g, ranges).unwrap().into(), "envelope")
        }
    };
    let model = Model::parse(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
    (Problem::new(model, None, density, None).unwrap(), format!("{kind}: {text}"))
}

fn certification_suite(runs: &mut Runs) -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(77);
    let mut violations = Vec::new();
    let mut worst: f64 = f64::NEG_INFINITY;
    for i in 0..200 {
        let (p, desc) = random_problem(&mut r);
        let mc = mc_check(&p, 1_000_000, i).unwrap();
        let (_, rep) = runs.run(p, EngineSettings::default(), &StopSpec::iterations(1_500));
        let slack = 4.0 * mc.std_error;
        let over = (rep.pass[0] - mc.estimate - slack).max(rep.fail[0] - (1.0 - mc.estimate) - slack);
        worst = worst.max(over);
        if over > 0.0 {
            violations.push(format!("#{i} {desc} pass {:?} fail {:?} mc {}", rep.pass, rep.fail, mc.estimate));
        }
    }
    for v in &violations {
        eprintln!("violation {v}");
    }
    check(
        violations.is_empty(),
        format!("{} violations in 200 instances; largest excess over the Monte Carlo bound {worst:.2e}", violations.len()),
    )
}

fn anytime_and_determinism(runs: &mut Runs) -> Outcome {
    let c = bundled("pvr-gaussian").unwrap();
    let p = c.build().unwrap();
    let s = c.engine.clone();
    let (state_a, a) = runs.run(p.clone(), s.clone(), &StopSpec::iterations(5_000));
    let (_, b) = runs.run(p.clone(), s.clone(), &StopSpec::iterations(5_000));
    let identical = serde_json::to_string(&a.without_timing()).unwrap() == serde_json::to_string(&b.without_timing()).unwrap()
        && a.pass.map(f64::to_bits) == b.pass.map(f64::to_bits)
        && a.fail.map(f64::to_bits) == b.fail.map(f64::to_bits);

    let (mid, _) = runs.run(p.clone(), s.clone(), &StopSpec::iterations(2_000));
    let mid: EngineState = serde_json::from_str(&serde_json::to_string(&mid).unwrap()).unwrap();
    let (state_r, resumed) = resume(p, s, mid, &StopSpec::iterations(3_000)).unwrap();
    runs.0.push(resumed.clone());
    let same = resumed.without_timing() == a.without_timing() && state_r.regions == state_a.regions;

    let monotone = runs.0.iter().filter(|r| !history_monotone(r)).count();
    check(
        identical && same && monotone == 0,
        format!(
            "{} runs, {monotone} with a decreasing history; repeat identical: {identical}; run+resume equals run: {same}",
            runs.0.len()
        ),
    )
}

const GL_X: [f64; 5] = [-0.906_179_845_938_664, -0.538_469_310_105_683_1, 0.0, 0.538_469_310_105_683_1, 0.906_179_845_938_664];
const GL_W: [f64; 5] = [0.236_926_885_056_189_1, 0.478_628_670_499_366_5, 0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1];

/// Composite tensor Gauss-Legendre with `m` panels per axis.
fn quadrature(d: &dyn DensityBound, b: &[Interval], m: usize) -> f64 {
    let axes: Vec<Vec<(f64, f64)>> = b
        .iter()
        .map(|iv| {
            let h = iv.width() / m as f64;
            (0..m)
                .flat_map(|p| (0..5).map(move |q| (iv.lo() + (p as f64 + 0.5 + 0.5 * GL_X[q]) * h, 0.5 * h * GL_W[q])))
                .collect()
        })
        .collect();
    let mut total = 0.0;
    let mut x = vec![0.0; b.len()];
    // depth-first over the tensor grid
    fn walk(d: &dyn DensityBound, axes: &[Vec<(f64, f64)>], k: usize, w: f64, x: &mut [f64], total: &mut f64) {
        if k == axes.len() {
            *total += w * d.value(x);
            return;
        }
        for &(p, pw) in &axes[k] {
            x[k] = p;
            walk(d, axes, k + 1, w * pw, x, total);
        }
    }
    walk(d, &axes, 0, 1.0, &mut x, &mut total);
    total
}

fn tightening_formulas() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let (mut below_basic, mut above_oracle) = (0usize, 0usize);
    let mut worst_excess: f64 = f64::NEG_INFINITY;
    let (mut monotone_used, mut convex_used) = (0usize, 0usize);
    let mut densities = Vec::new();
    for _ in 0..50 {
        let n = r.random_range(1..=3);
        densities.push(random_gaussian(&mut r, n));
    }
    for _ in 0..10_000 {
        let g = &densities[r.random_range(0..densities.len())];
        let n = g.dim();
        let b: Vec<Interval> = (0..n)
            .map(|k| {
                let (m, s) = (g.mean()[k], g.std_devs()[k]);
                let lo = m + r.random_range(-4.0..3.0) * s;
                Interval::new(lo, lo + r.random_range(0.01..2.0) * s)
            })
            .collect();
        let panels = [12, 4, 2][n - 1];
        let coarse = quadrature(g, &b, panels);
        let fine = quadrature(g, &b, 2 * panels);
        let tol = 1e-9 + (fine - coarse).abs();
        let basic = prob_lower_basic(g, &b);
        let mut bounds = Vec::new();
        for k in 0..n {
            for dir in [Direction::Increasing, Direction::Decreasing] {
                if let Some(v) = prob_lower_monotone(g, &b, k, dir) {
                    monotone_used += 1;
                    bounds.push(v);
                }
            }
            if let Some(v) = prob_lower_convex(g, &b, k) {
                convex_used += 1;
                bounds.push(v);
            }
        }
        bounds.push(prob_lower_best(g, &b).lower);
        for v in bounds {
            below_basic += (v < basic) as usize;
            above_oracle += (v > fine + tol) as usize;
            worst_excess = worst_excess.max(v - fine);
        }
    }
    let identity = ExpressionLowerBound::new(parse_expression("x", &["x".to_string()]).unwrap(), vec![Interval::new(0.0, 1.0)]).unwrap();
    let half = prob_lower_monotone(&identity, &[Interval::new(0.0, 1.0)], 0, Direction::Increasing);
    check(
        below_basic == 0 && above_oracle == 0 && half == Some(0.5),
        format!(
            "10000 boxes, {monotone_used} monotone and {convex_used} convex bounds: {below_basic} below basic, \
             {above_oracle} above quadrature (largest excess {worst_excess:.1e}); f(c) = c gives {half:?}"
        ),
    )
}

fn one_d_convergence(runs: &mut Runs) -> Outcome {
    let c = bundled("normal-1d").unwrap();
    let (_, r) = runs.run(c.build().unwrap(), c.engine.clone(), &c.stop);
    let truth = phi(1.0);
    check(
        r.pass[0] <= truth && truth <= r.pass[1] && r.gap < 0.02,
        format!(
            "Pr(X <= 1) in [{:.6}, {:.6}], gap {:.2e} after {} iterations (budget {:?}); Phi(1) = {truth:.10}",
            r.pass[0], r.pass[1], r.gap, r.iterations, c.stop.max_iterations
        ),
    )
}

fn main() -> ExitCode {
    let mut runs = Runs(Vec::new());
    let checks: Vec<(&str, Box<dyn FnOnce(&mut Runs) -> Outcome>)> = vec![
        ("1 pvr-gaussian bounds", Box::new(pvr_gaussian)),
        ("2 gap floors", Box::new(gap_floors)),
        ("3 worked examples", Box::new(|_: &mut Runs| worked_examples())),
        ("4 pvr checkpoints", Box::new(pvr_checkpoints)),
        ("5 certification suite", Box::new(certification_suite)),
        ("8 one-dimensional convergence", Box::new(one_d_convergence)),
        ("7 tightening formulas", Box::new(|_: &mut Runs| tightening_formulas())),
        // last, so it sees the histories of every run above
        ("6 monotone and deterministic", Box::new(anytime_and_determinism)),
    ];
    let mut results = Vec::new();
    for (name, f) in checks {
        let t = Instant::now();
        let outcome = f(&mut runs);
        results.push((name, outcome, t.elapsed().as_secs_f64()));
    }
    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (name, outcome, secs) in &results {
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {name}: {detail} [{secs:.1} s]");
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
