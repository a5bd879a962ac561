//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits nonzero if any failed.

use std::process::ExitCode;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use g0hs::characteristics::{flow, lagrangian_momentum_error};
use g0hs::conserved::{groenwall_check, l1, ConservationReport, ReportObserver};
use g0hs::decay::{decay_persistence, support_radius};
use g0hs::evolution::simulate_observed;
use g0hs::initial::{bump_momentum, InitialDatum};
use g0hs::kinks::{
    exact_symmetric_kink_position, exact_two_kink_field, integrate_kinks, kink_field, KinkEnsemble,
};
use g0hs::peakons::{integrate_peakons, two_peakon_invariant, NegKTwoPeakon, PeakonEnsemble};
use g0hs::{simulate, Field, Grid, HelmholtzSolver, Result, SolverConfig, Trajectory};

struct Verdict {
    id: u32,
    pass: bool,
    detail: String,
}

fn verdict(id: u32, outcome: Result<(bool, String)>) -> Verdict {
    match outcome {
        Ok((pass, detail)) => Verdict { id, pass, detail },
        Err(e) => Verdict {
            id,
            pass: false,
            detail: format!("error: {e}"),
        },
    }
}

fn line() -> Grid {
    Grid::decaying(-40.0, 40.0, 4096).expect("valid grid")
}

/// Smooth random field: a few Gaussians on a decaying grid, a few Fourier
/// modes on a periodic one.
fn random_field(g: Grid, rng: &mut StdRng) -> Field {
    let len = g.length();
    let terms: Vec<(f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-0.3..0.3) * len,
                rng.gen_range(0.5..3.0),
            )
        })
        .collect();
    let f = |x: f64| match g.boundary() {
        g0hs::Boundary::Decaying => terms
            .iter()
            .map(|&(a, c, w)| a * (-((x - c) / w).powi(2)).exp())
            .sum(),
        g0hs::Boundary::Periodic => terms
            .iter()
            .enumerate()
            .map(|(j, &(a, c, _))| {
                a * (2.0 * std::f64::consts::PI * (j + 1) as f64 * (x - c) / len).sin()
            })
            .sum(),
    };
    Field::from_fn(g, f).expect("finite samples")
}

fn inverse_pair() -> Result<(bool, String)> {
    let mut rng = StdRng::seed_from_u64(20_240_601);
    let mut worst: f64 = 0.0;
    for g in [Grid::periodic(-20.0, 20.0, 1024)?, Grid::decaying(-20.0, 20.0, 1024)?] {
        let s = HelmholtzSolver::new(g);
        for _ in 0..100 {
            let f = random_field(g, &mut rng);
            let back = s.momentum(&s.inv_helmholtz(&f)?)?;
            worst = worst.max(back.max_diff(&f)? / f.max_abs().max(1.0));
        }
    }
    Ok((worst <= 1e-12, format!("max error {worst:.2e} (tol 1e-12)")))
}

/// The bump-momentum run with its monitor series.
struct BumpRun {
    k: i32,
    m0_max: f64,
    m0_l1: f64,
    traj: Trajectory,
    report: ConservationReport,
}

fn bump_run(k: i32) -> Result<BumpRun> {
    let g = line();
    let m0 = bump_momentum(g, 1.0)?;
    let u0 = InitialDatum::BumpMomentum { a: 1.0 }.sample(g)?;
    let s = HelmholtzSolver::new(g);
    let mut obs = ReportObserver::new(&s);
    let traj = simulate_observed(&u0, &SolverConfig::new(k, 5.0), &mut obs)?;
    Ok(BumpRun {
        k,
        m0_max: m0.max_abs(),
        m0_l1: l1(&m0),
        traj,
        report: obs.report,
    })
}

fn h0_conservation(run: &BumpRun) -> (bool, String) {
    let d = ConservationReport::drift(&run.report.h0);
    (d <= 1e-6, format!("h0 drift {d:.2e} (tol 1e-6)"))
}

fn l1_conservation(run: &BumpRun) -> (bool, String) {
    let du = ConservationReport::drift(&run.report.l1_u);
    let dm = ConservationReport::drift(&run.report.l1_m);
    (
        du <= 1e-5 && dm <= 1e-5,
        format!("l1_u drift {du:.2e}, l1_m drift {dm:.2e} (tol 1e-5)"),
    )
}

fn sign_persistence(runs: &[BumpRun]) -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in runs {
        let low = r.report.min_m.iter().copied().fold(f64::INFINITY, f64::min);
        let floor = -1e-8 * r.m0_max;
        pass &= low >= floor;
        parts.push(format!("k={} min_m {low:.2e}", r.k));
    }
    (pass, format!("{} (floor -1e-8 max m0)", parts.join(", ")))
}

fn slope_bound(run: &BumpRun) -> (bool, String) {
    let low = run.report.min_ux.iter().copied().fold(f64::INFINITY, f64::min);
    let floor = -run.m0_l1 - 1e-3;
    (low >= floor, format!("min u_x {low:.4} vs bound {floor:.4}"))
}

fn u_plus_ux(run: &BumpRun) -> (bool, String) {
    let low = run
        .report
        .min_u_plus_ux
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let floor = -1e-6 * run.m0_max;
    (low >= floor, format!("min u+u_x {low:.2e} (floor {floor:.1e})"))
}

fn groenwall(runs: &[BumpRun]) -> Result<(bool, String)> {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in runs {
        let kappa = r.report.slope_floor();
        let ok = groenwall_check(&r.report, kappa)?;
        pass &= ok;
        parts.push(format!("k={} kappa {kappa:.4} {}", r.k, if ok { "ok" } else { "violated" }));
    }
    Ok((pass, parts.join(", ")))
}

fn support_growth(run: &BumpRun) -> Result<(bool, String)> {
    let r0 = support_radius(run.traj.initial(), 1e-10)?;
    let mut worst = f64::INFINITY;
    for (t, u) in run.traj.iter().skip(1) {
        debug_assert!(t > 0.0);
        worst = worst.min(support_radius(u, 1e-10)? - r0);
    }
    Ok((
        worst > 0.0,
        format!("initial radius {r0:.4}, smallest later excess {worst:.3e}"),
    ))
}

fn lagrangian_error(n: usize, snapshot_every: f64) -> Result<(f64, bool)> {
    let g = Grid::decaying(-40.0, 40.0, n)?;
    let u0 = InitialDatum::BumpMomentum { a: 1.0 }.sample(g)?;
    let m0_max = bump_momentum(g, 1.0)?.max_abs();
    let config = SolverConfig::new(1, 2.0).with_snapshot_every(snapshot_every);
    let traj = simulate(&u0, &config)?;
    let seeds: Vec<f64> = (0..64).map(|j| -2.0 + 4.0 * j as f64 / 63.0).collect();
    let fm = flow(&traj, &seeds)?;
    Ok((lagrangian_momentum_error(&traj, &fm)? / m0_max, fm.is_monotone()))
}

fn lagrangian() -> Result<(bool, String)> {
    let (coarse, fine) = rayon::join(|| lagrangian_error(4096, 0.05), || lagrangian_error(8192, 0.025));
    let ((e1, mono1), (e2, mono2)) = (coarse?, fine?);
    let ratio = e1 / e2;
    Ok((
        e1 <= 5e-3 && ratio >= 3.5 && mono1 && mono2,
        format!(
            "error {e1:.2e} max m0 (tol 5e-3), refined {e2:.2e}, ratio {ratio:.2} (need 3.5), monotone {}",
            mono1 && mono2
        ),
    ))
}

fn single_peakon() -> Result<(bool, String)> {
    let mut pass = true;
    let (mut dq, mut dp): (f64, f64) = (0.0, 0.0);
    for k in [1, 2, 3, -1] {
        let (c, q0) = (1.5_f64, -2.0);
        let p0 = c.powf(1.0 / k as f64);
        let traj = integrate_peakons(&PeakonEnsemble::new(k, vec![p0], vec![q0])?, 10.0, 1e-3)?;
        for (t, e) in traj.times.iter().zip(&traj.states) {
            dq = dq.max((e.q[0] - (c * t + q0)).abs());
            dp = dp.max((e.p[0] - p0).abs());
        }
        pass &= dq <= 1e-9 && dp <= 1e-12;
    }
    Ok((pass, format!("max |q - (ct + q0)| {dq:.2e}, max |p - p0| {dp:.2e}")))
}

fn two_peakon_j() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for k in [1, 3] {
        let e0 = PeakonEnsemble::new(k, vec![1.0, -1.0], vec![1.0, -1.0])?;
        let traj = integrate_peakons(&e0, 3.0, 1e-3)?;
        let j0 = two_peakon_invariant(1.0, 1.0, k)?;
        for e in &traj.states {
            worst = worst.max((two_peakon_invariant(e.p[0], e.q[0], k)? / j0 - 1.0).abs());
        }
    }
    Ok((worst <= 1e-8, format!("max |J/J0 - 1| {worst:.2e} (tol 1e-8)")))
}

fn neg_k_hamiltonian() -> Result<(bool, String)> {
    let sys = NegKTwoPeakon::from_initial(1.0, 0.5, -3.0, 3.0);
    let traj = sys.integrate([1.0, 0.5], [-3.0, 3.0], 3.0, 1e-3)?;
    let mut dh: f64 = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for e in &traj.states {
        dh = dh.max((e.energy() / sys.h0 - 1.0).abs());
        let b = sys.bracket(e.p[0], e.p[1]);
        lo = lo.min(b);
        hi = hi.max(b);
    }
    let pass = dh <= 1e-8 && lo >= -1e-10 && hi <= 1.0 + 1e-10;
    Ok((pass, format!("max |H/H0 - 1| {dh:.2e}, bracket in [{lo:.4e}, {hi:.4e}]")))
}

fn kink_closed_form() -> Result<(bool, String)> {
    let traj = integrate_kinks(&KinkEnsemble::symmetric_pair(1, 1.0)?, 3.0, 1e-3)?;
    let mut dp: f64 = 0.0;
    for (t, e) in traj.times.iter().zip(&traj.states) {
        dp = dp.max((e.p[0] - exact_symmetric_kink_position(1.0, *t)?).abs());
    }
    let g = Grid::decaying(-20.0, 20.0, 4096)?;
    let df = exact_two_kink_field(1.0, 3.0, g)?.max_diff(&kink_field(traj.last(), g))?;
    Ok((
        dp <= 1e-9 && df <= 1e-8,
        format!("max |p - closed form| {dp:.2e}, field error {df:.2e}"),
    ))
}

fn decay_persists() -> Result<(bool, String)> {
    let g = Grid::decaying(-60.0, 60.0, 8192)?;
    let u0 = InitialDatum::ExpDecay { a: 1.0, theta: 0.5, x0: 0.0 }.sample(g)?;
    let runs: Vec<Result<(i32, f64)>> = [1, 2]
        .into_par_iter()
        .map(|k| {
            let traj = simulate(&u0, &SolverConfig::new(k, 2.0))?;
            let mut low = f64::INFINITY;
            for (_, fit) in decay_persistence(&traj, 0.15) {
                let e = fit?;
                low = low.min(e.theta_left.min(e.theta_right));
            }
            Ok((k, low))
        })
        .collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for r in runs {
        let (k, low) = r?;
        pass &= low >= 0.45;
        parts.push(format!("k={k} min theta {low:.4}"));
    }
    Ok((pass, format!("{} (floor 0.45)", parts.join(", "))))
}

/// Argmax refined by the vertex of the parabola through its neighbours.
fn crest(u: &Field) -> f64 {
    let v = u.values();
    let n = v.len();
    let i = (0..n).fold(0, |b, j| if v[j] > v[b] { j } else { b });
    let (l, c, r) = (v[(i + n - 1) % n], v[i], v[(i + 1) % n]);
    let curv = l - 2.0 * c + r;
    let shift = if curv < 0.0 { 0.5 * (l - r) / curv } else { 0.0 };
    u.grid().x(i) + shift * u.grid().dx()
}

fn peakon_cross_check() -> Result<(bool, String)> {
    let g = Grid::periodic(-20.0, 20.0, 4096)?;
    let u0 = InitialDatum::Peakon { c: 1.0, k: 1, q0: 0.0, mollified: true }.sample(g)?;
    let traj = simulate(&u0, &SolverConfig::new(1, 2.0))?;
    let mut worst: f64 = 0.0;
    for (t, u) in traj.iter() {
        worst = worst.max((crest(u) - t).abs());
    }
    Ok((worst <= 2e-2, format!("max |crest - ct| {worst:.3e} (tol 2e-2)")))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let independent: Vec<(u32, fn() -> Result<(bool, String)>)> = vec![
        (1, inverse_pair),
        (8, lagrangian),
        (9, single_peakon),
        (10, two_peakon_j),
        (11, neg_k_hamiltonian),
        (12, kink_closed_form),
        (13, decay_persists),
        (15, peakon_cross_check),
    ];
    let (bump, mut verdicts) = rayon::join(
        || [1, 2, 3].into_par_iter().map(bump_run).collect::<Vec<_>>(),
        || {
            independent
                .into_par_iter()
                .map(|(id, f)| verdict(id, f()))
                .collect::<Vec<_>>()
        },
    );
    match bump.into_iter().collect::<Result<Vec<BumpRun>>>() {
        Ok(runs) => {
            let k1 = &runs[0];
            verdicts.push(verdict(2, Ok(h0_conservation(k1))));
            verdicts.push(verdict(3, Ok(l1_conservation(k1))));
            verdicts.push(verdict(4, Ok(sign_persistence(&runs))));
            verdicts.push(verdict(5, Ok(slope_bound(k1))));
            verdicts.push(verdict(6, Ok(u_plus_ux(k1))));
            verdicts.push(verdict(7, groenwall(&runs)));
            verdicts.push(verdict(14, support_growth(k1)));
        }
        Err(e) => {
            for id in [2, 3, 4, 5, 6, 7, 14] {
                verdicts.push(Verdict {
                    id,
                    pass: false,
                    detail: format!("error: {e}"),
                });
            }
        }
    }
    verdicts.sort_by_key(|v| v.id);
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    for v in &verdicts {
        println!(
            "{} criterion {:>2}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.id,
            v.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        verdicts.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
