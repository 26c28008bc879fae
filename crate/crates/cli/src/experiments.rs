//! One function per experiment kind, each producing a [`Report`].
//!
//! Every table except the ladder uses the long layout [`LONG_COLUMNS`]: one row
//! per quantity with its oracle reference (empty where none is defined), the
//! tolerance applied (empty where there is no check) and the outcome.

use skewlab_core::engine::{conditional_call, estimate_functionals};
use skewlab_core::lab::{check_swap_approximations, convergence_order, limit_experiment, run_rung};
use skewlab_core::smile::default_strikes;
use skewlab_core::{
    bs_price, oracle, zero_vanna_strike_flat, BSInputs, EstimateWithError, GridSpec, ModelSpec,
    Result, Side,
};

use crate::config::{Experiment, ExperimentConfig};
use crate::report::{Cell, Report, Table, PLOT_COLUMNS};

pub const LONG_COLUMNS: [&str; 9] = [
    "quantity",
    "tau",
    "k",
    "value",
    "std_error",
    "reference",
    "tolerance",
    "pass",
    "heavy_tail",
];

pub const LADDER_COLUMNS: [&str; 21] = [
    "row",
    "tau",
    "q_skew",
    "q_skew_se",
    "q_cov",
    "q_cov_se",
    "q_zv",
    "q_zv_se",
    "swap_gap_minus",
    "swap_gap_minus_se",
    "swap_gap_plus",
    "swap_gap_plus_se",
    "mart_mean",
    "mart_mean_se",
    "reference",
    "swap_order_minus",
    "swap_order_minus_se",
    "swap_order_plus",
    "swap_order_plus_se",
    "pass",
    "heavy_tail",
];

/// Exactly-zero-variance comparisons still carry rounding.
const ROUNDING: f64 = 1e-10;
/// Relative tolerance of the extrapolated ladder limits.
pub const LIMIT_REL_TOL: f64 = 0.05;
/// Minimum log-log order of the swap-approximation gaps along a ladder.
pub const MIN_SWAP_ORDER: f64 = 0.8;

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let (table, warnings_from_tails) = match cfg.experiment {
        Experiment::Price => price(cfg)?,
        Experiment::Smile => smile(cfg)?,
        Experiment::Swaps => swaps(cfg)?,
        Experiment::ApproxCheck => approx_check(cfg)?,
        Experiment::LimitLadder => ladder(cfg)?,
    };
    let plot = plot_rows(cfg.experiment, &table);
    let warnings = if warnings_from_tails {
        vec![
            "heavy-tailed samples: a single path exceeds 1% of a sum; see heavy_tail column".into(),
        ]
    } else {
        Vec::new()
    };
    Ok(Report {
        experiment: cfg.experiment.name(),
        config: echo(cfg),
        table,
        plot,
        warnings,
    })
}

fn echo(cfg: &ExperimentConfig) -> Vec<(&'static str, Cell)> {
    let m = &cfg.model;
    let steps = match (cfg.experiment, cfg.steps) {
        (Experiment::LimitLadder, None) => Cell::Text("auto".into()),
        _ => Cell::Int(cfg.grid.steps as u64),
    };
    vec![
        ("experiment", Cell::Text(cfg.experiment.name().into())),
        ("spot", m.spot.into()),
        ("sigma0", m.sigma0.into()),
        ("alpha", m.alpha.into()),
        ("rho", m.rho.into()),
        ("tau", m.tau.into()),
        ("steps", steps),
        ("paths", Cell::Int(cfg.grid.paths as u64)),
        ("seed", Cell::Int(cfg.grid.seed)),
        ("antithetic", cfg.grid.antithetic.into()),
        ("taus", Cell::List(cfg.taus.clone())),
        ("strikes", Cell::List(cfg.strikes.clone())),
    ]
}

struct Check {
    reference: Option<f64>,
    tolerance: Option<f64>,
    pass: bool,
}

impl Check {
    fn none() -> Self {
        Self {
            reference: None,
            tolerance: None,
            pass: true,
        }
    }

    fn info(reference: f64) -> Self {
        Self {
            reference: Some(reference),
            tolerance: None,
            pass: true,
        }
    }

    /// `|value - reference| <= tolerance`.
    fn near(value: f64, reference: f64, tolerance: f64) -> Self {
        Self {
            reference: Some(reference),
            tolerance: Some(tolerance),
            pass: (value - reference).abs() <= tolerance,
        }
    }

    /// Three standard errors, floored at rounding level.
    fn stat(e: &EstimateWithError, reference: f64) -> Self {
        Self::near(e.value, reference, (3.0 * e.std_error).max(ROUNDING))
    }
}

fn long_row(
    quantity: &str,
    tau: f64,
    k: Option<f64>,
    value: f64,
    std_error: Option<f64>,
    check: Check,
    heavy: bool,
) -> Vec<Cell> {
    vec![
        quantity.into(),
        tau.into(),
        k.into(),
        value.into(),
        std_error.into(),
        check.reference.into(),
        check.tolerance.into(),
        check.pass.into(),
        heavy.into(),
    ]
}

fn est_row(
    quantity: &str,
    m: &ModelSpec,
    e: &EstimateWithError,
    check: Check,
    heavy: bool,
) -> Vec<Cell> {
    long_row(
        quantity,
        m.tau,
        None,
        e.value,
        Some(e.std_error),
        check,
        heavy,
    )
}

fn strikes_or(cfg: &ExperimentConfig, default: Vec<f64>) -> Vec<f64> {
    if cfg.strikes.is_empty() {
        default
    } else {
        cfg.strikes.clone()
    }
}

fn price(cfg: &ExperimentConfig) -> Result<(Table, bool)> {
    let (m, g) = (&cfg.model, &cfg.grid);
    let strikes = strikes_or(cfg, vec![m.spot]);
    let n = strikes.len();
    let joint = estimate_functionals(m, g, n + 1, |p, out| {
        for (o, &k) in out.iter_mut().zip(&strikes) {
            *o = conditional_call(m, p, k);
        }
        out[n] = p.mart_factor;
    })?;
    let mut t = Table::new(&LONG_COLUMNS);
    for (j, &k) in strikes.iter().enumerate() {
        let e = joint.estimate(j);
        let intrinsic = (m.spot - k).max(0.0);
        let in_bounds = e.value >= intrinsic && e.value < m.spot;
        let mut check = if m.alpha == 0.0 {
            let bs = bs_price(&BSInputs::new(m.spot, k, m.sigma0, m.tau)?);
            Check::near(e.value, bs, (3.0 * e.std_error).max(ROUNDING * m.spot))
        } else {
            Check::none()
        };
        check.pass &= in_bounds;
        t.push(long_row(
            "call_price",
            m.tau,
            Some(k.ln()),
            e.value,
            Some(e.std_error),
            check,
            joint.heavy_tail[j],
        ));
    }
    let mart = joint.estimate(n);
    t.push(est_row(
        "mart_mean",
        m,
        &mart,
        Check::stat(&mart, 1.0),
        joint.heavy_tail[n],
    ));
    Ok((t, joint.any_heavy_tail()))
}

fn smile(cfg: &ExperimentConfig) -> Result<(Table, bool)> {
    let m = &cfg.model;
    let strikes = strikes_or(cfg, default_strikes(m));
    let r = run_rung(m, &cfg.grid, &strikes)?;
    let flat = m.alpha == 0.0;
    let heavy = r.heavy_tail;
    let vol_check = |e: &EstimateWithError| {
        if flat {
            Check::stat(e, m.sigma0)
        } else {
            Check::none()
        }
    };
    let mut t = Table::new(&LONG_COLUMNS);
    for p in r.smile.points() {
        let e = EstimateWithError {
            value: p.iv,
            std_error: p.iv_std_error,
            n: cfg.grid.samples(),
        };
        t.push(long_row(
            "iv",
            m.tau,
            Some(p.k),
            p.iv,
            Some(p.iv_std_error),
            vol_check(&e),
            heavy,
        ));
    }
    let i0 = EstimateWithError {
        value: r.skew.i0,
        std_error: r.skew.i0_std_error,
        n: r.i_minus.n,
    };
    t.push(est_row("atm_iv", m, &i0, vol_check(&i0), heavy));
    let limit = oracle::slope_limit(m.rho, m.alpha);
    let skew_check = if flat {
        Check::stat(&r.q_skew, 0.0)
    } else {
        // the limit is approached as tau shrinks; shown for reference only
        Check::info(limit)
    };
    t.push(est_row("atm_skew", m, &r.q_skew, skew_check, heavy));

    let x = m.log_spot();
    let z = &r.zero_vanna;
    let flat_k = |side| zero_vanna_strike_flat(x, m.sigma0, m.tau, side);
    for (name, k, side, i) in [
        ("minus", z.k_minus, Side::Minus, &r.i_minus),
        ("plus", z.k_plus, Side::Plus, &r.i_plus),
    ] {
        let k_check = if flat {
            Check::near(k, flat_k(side), 1e-8)
        } else {
            Check::none()
        };
        t.push(long_row(
            &format!("k_{name}"),
            m.tau,
            None,
            k,
            None,
            k_check,
            heavy,
        ));
        t.push(long_row(
            &format!("i_{name}"),
            m.tau,
            Some(k),
            i.value,
            Some(i.std_error),
            vol_check(i),
            heavy,
        ));
    }
    Ok((t, heavy))
}

fn swaps(cfg: &ExperimentConfig) -> Result<(Table, bool)> {
    let m = &cfg.model;
    let joint = estimate_functionals(m, &cfg.grid, 5, |p, out| {
        out[0] = p.realized_vol;
        out[1] = p.mart_factor * p.realized_vol;
        out[2] = (p.mart_factor - 1.0) * p.realized_vol;
        out[3] = p.realized_vol * p.int_sigma_dw;
        out[4] = p.mart_factor;
    })?;
    let e: Vec<EstimateWithError> = (0..5).map(|i| joint.estimate(i)).collect();
    let h = &joint.heavy_tail;
    let flat = m.alpha == 0.0;
    let s0 = m.sigma0;
    let mut t = Table::new(&LONG_COLUMNS);

    // Jensen: E[sqrt(int_var / tau)] <= sigma0, one-sided
    let tol = (3.0 * e[0].std_error).max(ROUNDING);
    let jensen = Check {
        reference: Some(s0),
        tolerance: Some(tol),
        pass: e[0].value - s0 <= tol && (!flat || (e[0].value - s0).abs() <= tol),
    };
    t.push(est_row("vol_swap", m, &e[0], jensen, h[0]));
    let dual = if flat {
        Check::stat(&e[1], s0)
    } else {
        Check::none()
    };
    t.push(est_row("dual_vol_swap", m, &e[1], dual, h[1]));
    let cov = if flat || m.rho == 0.0 {
        Check::stat(&e[2], 0.0)
    } else {
        Check::info(m.rho * oracle::sigma_dw_small_tau(s0, m.alpha, m.tau))
    };
    t.push(est_row("return_vol_covariance", m, &e[2], cov, h[2]));
    let small = oracle::sigma_dw_small_tau(s0, m.alpha, m.tau);
    // small-maturity value plus an O(tau^2) allowance
    let sdw_tol =
        (3.0 * e[3].std_error).max(0.02 * small).max(ROUNDING) + small * m.alpha * m.alpha * m.tau;
    t.push(est_row(
        "sigma_dw_expectation",
        m,
        &e[3],
        Check::near(e[3].value, small, sdw_tol),
        h[3],
    ));
    t.push(est_row(
        "mart_mean",
        m,
        &e[4],
        Check::stat(&e[4], 1.0),
        h[4],
    ));
    Ok((t, joint.any_heavy_tail()))
}

fn approx_check(cfg: &ExperimentConfig) -> Result<(Table, bool)> {
    let m = &cfg.model;
    let r = check_swap_approximations(m, &cfg.grid, &cfg.strikes)?;
    let heavy = r.rung.heavy_tail;
    let flat = m.alpha == 0.0;
    // the swap approximations hold up to O(tau): 1e-4 at one week
    let gap_tol = 52.0e-4 * m.tau;
    let gap = |e: &EstimateWithError| {
        if flat {
            Check::stat(e, 0.0)
        } else {
            Check::near(e.value, 0.0, gap_tol)
        }
    };
    let oracle_spread = m.rho * oracle::sigma_dw_small_tau(m.sigma0, m.alpha, m.tau);
    let spread = |e: &EstimateWithError| {
        if flat {
            Check::stat(e, 0.0)
        } else {
            Check::info(oracle_spread)
        }
    };
    let spread_tol = if flat {
        (3.0 * r.spread_gap.std_error).max(ROUNDING)
    } else {
        (3.0 * r.spread_gap.std_error).max(0.1 * r.rho_sigma_dw.value.abs())
    };

    let mut t = Table::new(&LONG_COLUMNS);
    t.push(est_row(
        "vol_swap",
        m,
        &r.rung.vol_swap,
        Check::none(),
        heavy,
    ));
    t.push(est_row("i_minus", m, &r.rung.i_minus, Check::none(), heavy));
    t.push(est_row(
        "swap_gap_minus",
        m,
        &r.swap_gap_minus,
        gap(&r.swap_gap_minus),
        heavy,
    ));
    t.push(est_row(
        "dual_vol_swap",
        m,
        &r.rung.dual_vol_swap,
        Check::none(),
        heavy,
    ));
    t.push(est_row("i_plus", m, &r.rung.i_plus, Check::none(), heavy));
    t.push(est_row(
        "swap_gap_plus",
        m,
        &r.swap_gap_plus,
        gap(&r.swap_gap_plus),
        heavy,
    ));
    t.push(est_row(
        "zv_spread",
        m,
        &r.zv_spread,
        spread(&r.zv_spread),
        heavy,
    ));
    t.push(est_row(
        "rho_sigma_dw",
        m,
        &r.rho_sigma_dw,
        spread(&r.rho_sigma_dw),
        heavy,
    ));
    t.push(est_row(
        "spread_gap",
        m,
        &r.spread_gap,
        Check::near(r.spread_gap.value, 0.0, spread_tol),
        heavy,
    ));
    Ok((t, heavy))
}

fn ladder(cfg: &ExperimentConfig) -> Result<(Table, bool)> {
    let m = &cfg.model;
    // an unset step count lets each rung use its own default
    let g = GridSpec::new(
        cfg.steps.unwrap_or(1),
        cfg.grid.paths,
        cfg.grid.seed,
        cfg.grid.antithetic,
    )?;
    let rep = limit_experiment(m, &g, &cfg.taus, &[])?;
    let mut t = Table::new(&LADDER_COLUMNS);
    let mut heavy_any = false;
    for (i, r) in rep.rungs.iter().enumerate() {
        let mart_ok = Check::stat(&r.mart_mean, 1.0).pass;
        heavy_any |= r.heavy_tail;
        let mut row: Vec<Cell> = vec!["rung".into(), r.tau().into()];
        for e in [
            &rep.q_skew[i],
            &rep.q_cov[i],
            &rep.q_zv[i],
            &r.swap_gap_minus,
            &r.swap_gap_plus,
            &r.mart_mean,
        ] {
            row.push(e.value.into());
            row.push(e.std_error.into());
        }
        row.push(rep.reference_slope.into());
        row.extend([Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty]);
        row.push(mart_ok.into());
        row.push(r.heavy_tail.into());
        t.push(row);
    }

    let mut pass = (0..3).all(|i| {
        let e = &rep.extrapolated[i];
        let tol = (3.0 * e.std_error)
            .max(LIMIT_REL_TOL * rep.reference_slope.abs())
            .max(ROUNDING);
        (e.value - rep.reference_slope).abs() <= tol
    });
    let gaps_minus: Vec<_> = rep.rungs.iter().map(|r| r.swap_gap_minus).collect();
    let gaps_plus: Vec<_> = rep.rungs.iter().map(|r| r.swap_gap_plus).collect();
    let mut order_cells = Vec::new();
    for gaps in [&gaps_minus, &gaps_plus] {
        match convergence_order(&rep.taus, gaps) {
            Some((order, se)) if m.alpha > 0.0 => {
                pass &= order >= MIN_SWAP_ORDER;
                order_cells.push(order.into());
                order_cells.push(se.into());
            }
            _ => order_cells.extend([Cell::Empty, Cell::Empty]),
        }
    }
    let mut row: Vec<Cell> = vec!["limit".into(), 0.0.into()];
    for e in &rep.extrapolated {
        row.push(e.value.into());
        row.push(e.std_error.into());
    }
    row.extend(std::iter::repeat_n(Cell::Empty, 6));
    row.push(rep.reference_slope.into());
    row.extend(order_cells);
    row.push(pass.into());
    row.push(heavy_any.into());
    t.push(row);
    Ok((t, heavy_any))
}

/// Tidy rows for plotting, derived from the report table.
fn plot_rows(experiment: Experiment, table: &Table) -> Table {
    let mut plot = Table::new(&PLOT_COLUMNS);
    let col = |name: &str| table.columns.iter().position(|&c| c == name).unwrap();
    if experiment == Experiment::LimitLadder {
        let quantities = ["q_skew", "q_cov", "q_zv", "swap_gap_minus", "swap_gap_plus"];
        for row in &table.rows {
            for q in quantities {
                let v = &row[col(q)];
                if matches!(v, Cell::Empty) {
                    continue;
                }
                let se = row[col(&format!("{q}_se"))].clone();
                plot.push(vec![
                    row[col("tau")].clone(),
                    Cell::Empty,
                    q.into(),
                    v.clone(),
                    se,
                ]);
            }
        }
    } else {
        for row in &table.rows {
            plot.push(vec![
                row[col("tau")].clone(),
                row[col("k")].clone(),
                row[col("quantity")].clone(),
                row[col("value")].clone(),
                row[col("std_error")].clone(),
            ]);
        }
    }
    plot
}
