use capreg::monopoly::{contract_prices_monopoly, sb_payments_monopoly, DerivativeMode};
use capreg::scenario::{run_scenario, scenario_controls, simulate_scenario, SimSettings};
use capreg::simulator::{
    evaluate_contract, simulate_contract_values, simulate_paths_with, QvMode, SimOptions,
};
use capreg::{MarketSpec, ScenarioTag, TimeGrid, VolMode};

fn reference() -> (MarketSpec, TimeGrid) {
    let spec = MarketSpec::reference();
    let grid = TimeGrid::weekly(spec.principal.horizon).unwrap();
    (spec, grid)
}

fn tag(name: &str) -> ScenarioTag {
    name.parse().unwrap()
}

/// Contract of a risk-neutral monopolist written as externality payments
/// minus market revenue plus cost reimbursement minus the intermittency tax.
fn risk_neutral_contract(
    xs: &[[f64; 2]],
    z: &[[f64; 2]],
    a: &[[f64; 2]],
    b: &[[f64; 2]],
    spec: &MarketSpec,
    grid: &TimeGrid,
) -> f64 {
    let dt = grid.dt();
    let x0 = xs[0];
    let h = spec.principal.vol_penalty;
    let k = spec.principal.externality;
    let p = spec.power_price;
    let mut stochastic = 0.0;
    for step in 0..grid.steps {
        let x = xs[step];
        for j in 0..2 {
            stochastic += k[j] * (x[j] - x0[j]) * dt - p * x[j] * dt;
            stochastic -= 0.5 * h * b[step][j] * b[step][j] * dt;
        }
    }
    let running: Vec<f64> = (0..grid.len())
        .map(|i| {
            let t = &spec.tech;
            let mut cost = t[0].linear_cost * a[i][0]
                + t[1].linear_cost * a[i][1]
                + 0.5 * t[0].quadratic_cost * a[i][0].powi(2)
                + 0.5 * t[1].quadratic_cost * a[i][1].powi(2)
                + spec.congestion * a[i][0] * a[i][1];
            for j in 0..2 {
                let (s, cap) = (t[j].vol_cost_scale, t[j].uncontrolled_vol);
                if b[i][j] < cap {
                    cost += s * (1.0 / b[i][j].powi(2) - 1.0 / cap.powi(2));
                }
                cost -= z[i][j] * a[i][j] - 0.5 * b[i][j].powi(2) * h;
            }
            cost
        })
        .collect();
    let deterministic = grid.trapezoid(&running);
    spec.monopolist.reservation_ce + spec.energy_scale * (stochastic + deterministic)
}

#[test]
fn risk_neutral_contract_matches_rewritten_form() {
    let spec = MarketSpec::reference().risk_neutral_agents();
    let grid = TimeGrid::weekly(spec.principal.horizon).unwrap();
    for mode in [VolMode::Uncontrolled, VolMode::Controlled] {
        let schedule = sb_payments_monopoly(&grid, &spec, mode).unwrap();
        let prices =
            contract_prices_monopoly(&schedule, &spec, mode, DerivativeMode::CentralDifference)
                .unwrap();
        let controls =
            scenario_controls(&spec, &grid, tag(&format!("M-FB-{}", mode.label()))).unwrap();
        let settings = SimSettings {
            n_paths: 50,
            ..SimSettings::default()
        };
        let bundle = simulate_scenario(&spec, &grid, &controls, &settings).unwrap();
        let values = evaluate_contract(&bundle, &prices, &grid).unwrap();
        let z: Vec<[f64; 2]> = (0..grid.len())
            .map(|k| [schedule.z(k, 0, 0), schedule.z(k, 0, 1)])
            .collect();
        for (p, v) in values.iter().enumerate() {
            let oracle = risk_neutral_contract(
                bundle.path(p),
                &z,
                &controls.drift,
                &controls.vol,
                &spec,
                &grid,
            );
            let got = v[0].total();
            assert!(
                (got - oracle).abs() <= 1e-6 * oracle.abs(),
                "path {p}: {got} vs {oracle}"
            );
        }
    }
}

#[test]
fn mean_paths_follow_the_drift_ode() {
    let (spec, grid) = reference();
    let settings = SimSettings {
        n_paths: 2000,
        ..SimSettings::default()
    };
    for name in ["M-SB-DVC", "C-BU-DC"] {
        let controls = scenario_controls(&spec, &grid, tag(name)).unwrap();
        let bundle = simulate_scenario(&spec, &grid, &controls, &settings).unwrap();
        let n = bundle.n_paths as f64;
        let dt = grid.dt();
        let mut ode = spec.x0();
        for k in 0..grid.len() {
            if k > 0 {
                // exact flow of the mean over a step with the control held constant
                for j in 0..2 {
                    let delta = spec.tech[j].depreciation;
                    let a = controls.drift[k - 1][j];
                    ode[j] = if delta > 0.0 {
                        let decay = (-delta * dt).exp();
                        ode[j] * decay + a * (1.0 - decay) / delta
                    } else {
                        ode[j] + a * dt
                    };
                }
            }
            for j in 0..2 {
                let column: Vec<f64> = (0..bundle.n_paths).map(|p| bundle.path(p)[k][j]).collect();
                let mean = column.iter().sum::<f64>() / n;
                let var = column.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
                let se = (var / n).sqrt();
                assert!(
                    (mean - ode[j]).abs() <= 3.0 * se + 1e-9 * ode[j].abs(),
                    "{name} t={} tech {j}: {mean} vs {}",
                    grid.time(k),
                    ode[j]
                );
            }
        }
    }
}

#[test]
fn volatility_incentives_smooth_the_paths() {
    let (spec, grid) = reference();
    let opts = SimOptions {
        qv: QvMode::Realized,
    };
    for market in ["M", "C"] {
        let mut averages = Vec::new();
        for vol in ["DC", "DVC"] {
            let controls =
                scenario_controls(&spec, &grid, tag(&format!("{market}-SB-{vol}"))).unwrap();
            let bundle = simulate_paths_with(
                &controls,
                spec.x0(),
                spec.depreciation(),
                &grid,
                200,
                5,
                opts,
            )
            .unwrap();
            let mut avg = [0.0; 2];
            for q in &bundle.qv {
                avg[0] += q[0];
                avg[1] += q[1];
            }
            averages.push(avg.map(|s| s / (bundle.n_paths as f64 * grid.horizon)));
        }
        for j in 0..2 {
            assert!(
                averages[1][j] < averages[0][j],
                "{market} tech {j}: {averages:?}"
            );
        }
    }
}

#[test]
fn streamed_contracts_match_stored_paths() {
    let (spec, grid) = reference();
    let settings = SimSettings {
        n_paths: 100,
        ..SimSettings::default()
    };
    let out = run_scenario(&spec, &grid, tag("C-SB-DVC"), &settings).unwrap();
    let streamed = simulate_contract_values(
        &out.controls,
        out.prices.as_ref().unwrap(),
        spec.x0(),
        spec.depreciation(),
        &grid,
        settings.n_paths,
        settings.seed,
        SimOptions::default(),
    )
    .unwrap();
    for (a, b) in out
        .contract_values
        .iter()
        .flatten()
        .zip(streamed.iter().flatten())
    {
        assert!((a.total() - b.total()).abs() <= 1e-10 * a.total().abs());
    }
}

#[test]
fn scenario_runs_do_not_depend_on_thread_count() {
    let (spec, grid) = reference();
    let settings = SimSettings {
        n_paths: 64,
        ..SimSettings::default()
    };
    let run = || run_scenario(&spec, &grid, tag("M-SB-DVC"), &settings).unwrap();
    let many = run();
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(run);
    assert_eq!(many.metrics, one.metrics);
    assert_eq!(many.contract_values, one.contract_values);
    assert_eq!(many.payments, one.payments);
}

#[test]
fn reference_scenario_headlines() {
    let (spec, grid) = reference();
    let out = run_scenario(&spec, &grid, tag("M-SB-DVC"), &SimSettings::default()).unwrap();
    let share = out.metrics.terminal_share.mean;
    assert!((share - 0.95).abs() < 0.1, "{share}");
    assert_eq!(out.metrics.times.len(), 521);
    assert!(out.certainty_equivalents.principal.unwrap().is_finite());
}
