use serde_json::{json, Value};
use shotnoise::analytic::{
    c3_squeezed_equal_time, c_thermal_3, classical_drive_skewness_shape, eval_surface, AnalyticPart,
};
use shotnoise::check::{run_suite, run_suite_with, CriterionReport, Level, Mutated, Mutation};
use shotnoise::langevin::{combine_c3, map_driven, map_squeezed, third_moment_single, BispectrumEstimator, SdeConfig, Window};
use shotnoise::lindblad::{keldysh_c3, oracle_bispectrum, FockWorkspace};
use shotnoise::model::{
    intracavity_drive_photons, BispectrumSurface, CavityParams, FreqGrid2D, ParamsSnapshot,
};
use shotnoise::ode::IntegratorConfig;
use shotnoise::spectroscopy::{default_t_f, secular_rates};

use crate::args::{Common, SkewModel, SourceArg};
use crate::output::{fmt, write_outputs, RunMeta, Table};
use crate::CliError;

const SDE_STRIDE: usize = 5;

fn cavity_json(p: &CavityParams<f64>) -> Value {
    json!({
        "gamma": p.gamma,
        "delta": p.delta,
        "nth": p.n_th,
        "drive_re": p.drive().re,
        "drive_im": p.drive().im,
        "ndr": intracavity_drive_photons(p),
    })
}

fn workspace(c: &Common, p: &CavityParams<f64>) -> Result<FockWorkspace<f64>, CliError> {
    Ok(match c.dim {
        Some(d) => FockWorkspace::build(p, d)?,
        None => FockWorkspace::build_auto(p)?,
    })
}

fn surface_table(s: &BispectrumSurface<f64>) -> Table {
    let mut t = Table::new(vec!["omega1", "omega2", "re", "im"]);
    for ((a, b), v) in s.grid.points().zip(&s.values) {
        t.push(vec![fmt(a), fmt(b), fmt(v.re), fmt(v.im)]);
    }
    t
}

/// Largest sample stride (at most [`SDE_STRIDE`]) whose Nyquist frequency covers the grid.
fn stride_for(grid: &FreqGrid2D<f64>, dt: f64) -> usize {
    let wmax = grid
        .points()
        .map(|(a, b)| a.abs().max(b.abs()).max((a + b).abs()))
        .fold(0.0, f64::max);
    (1..=SDE_STRIDE)
        .rev()
        .find(|&s| std::f64::consts::PI / (s as f64 * dt) >= wmax)
        .unwrap_or(1)
}

pub fn bispectrum(source: SourceArg, c: &Common) -> Result<(), CliError> {
    let out = c.out()?;
    let p = c.cavity()?;
    let grid = c.grid()?;
    let mut params = cavity_json(&p);
    params["grid"] = json!({ "omega1": grid.omega1(), "omega2": grid.omega2() });
    let (surface, name, mut meta_extra) = match source {
        SourceArg::AnalyticThermal | SourceArg::AnalyticDrive | SourceArg::AnalyticTotal => {
            let (part, name) = match source {
                SourceArg::AnalyticThermal => (AnalyticPart::Thermal, "analytic-thermal"),
                SourceArg::AnalyticDrive => (AnalyticPart::Drive, "analytic-drive"),
                _ => (AnalyticPart::Total, "analytic-total"),
            };
            (eval_surface(&p, &grid, part), name, (json!("closed form"), None, vec![]))
        }
        SourceArg::Lindblad => {
            let ws = workspace(c, &p)?;
            let window = c.window_t.unwrap_or(30.0 / p.gamma);
            let ntau = c.ntau.unwrap_or(241);
            params["dim"] = json!(ws.dim());
            params["window_T"] = json!(window);
            params["ntau"] = json!(ntau);
            let o = oracle_bispectrum(&ws, &grid, window, ntau)?;
            let bounds = json!({
                "tail_bound": o.tail_bound,
                "discretization_error": o.discretization_error,
                "lag_step": o.lag_step,
                "flagged": o.flagged,
                "uncertainty": o.surface.uncertainty,
            });
            if o.flagged {
                eprintln!("warning: lag-window tail bound {:.3e} exceeds 1e-3 of the peak", o.tail_bound);
            }
            (o.surface, "lindblad", (json!("truncated Fock space, lag quadrature"), Some(bounds), vec![]))
        }
        SourceArg::Langevin => {
            let dt = c.dt.unwrap_or(0.01);
            let total = c.tf.unwrap_or(200.0 / p.gamma);
            let n_traj = c.traj.unwrap_or(200);
            let stride = stride_for(&grid, dt);
            let cfg = SdeConfig::new(p.gamma, dt, total, n_traj, c.seed()).with_stride(stride);
            let segment_t = c.window_t.unwrap_or(100.0 / p.gamma);
            let segment = (segment_t / cfg.sample_spacing()).round() as usize;
            params["dt"] = json!(dt);
            params["tf"] = json!(total);
            params["burn_in"] = json!(cfg.burn_in);
            params["traj"] = json!(n_traj);
            params["stride"] = json!(stride);
            params["window_T"] = json!(segment_t);
            params["window"] = json!("hann");
            let est = BispectrumEstimator::new(&grid, cfg.sample_spacing(), segment, Window::Hann)?;
            let per = map_driven(&p, &cfg, |t| est.record_average(&t.photon_number()))?
                .into_iter()
                .collect::<shotnoise::Result<Vec<_>>>()?;
            let b = est.combine(&per, ParamsSnapshot::Cavity(p));
            let bounds = json!({ "stderr_re": b.stderr_re, "stderr_im": b.stderr_im });
            (b.surface, "langevin", (json!("Monte Carlo standard error"), Some(bounds), vec![c.seed()]))
        }
    };
    let mut meta = RunMeta::new("bispectrum", name, params);
    meta.tolerances = std::mem::take(&mut meta_extra.0);
    meta.error_bounds = meta_extra.1.take();
    meta.seeds = meta_extra.2;
    write_outputs(&out, &surface_table(&surface), &meta)
}

pub fn skewness(model: SkewModel, c: &Common) -> Result<(), CliError> {
    let out = c.out()?;
    let times: Vec<f64> = c.times()?.into_iter().map(f64::abs).collect();
    let mut meta;
    let table = match model {
        SkewModel::ShotnoiseLindblad | SkewModel::ShotnoiseAnalyticLimits => {
            let p = c.cavity()?;
            let m = 2.0 * p.n_th + 1.0;
            let ndr = intracavity_drive_photons(&p);
            let limit = |t: f64| c_thermal_3(&p, 0.0, t, t) + ndr * m * m * classical_drive_skewness_shape(&p, t);
            let mut params = cavity_json(&p);
            params["times"] = json!(times);
            let mut table = Table::new(vec!["t", "c3_pos", "c3_neg", "classical_limit"]);
            if model == SkewModel::ShotnoiseLindblad {
                let ws = workspace(c, &p)?;
                params["dim"] = json!(ws.dim());
                for &t in &times {
                    let pos = keldysh_c3(&ws, t, t)?;
                    let neg = keldysh_c3(&ws, -t, -t)?;
                    table.push(vec![fmt(t), fmt(pos), fmt(neg), fmt(limit(t))]);
                }
                meta = RunMeta::new("skewness", "shotnoise-lindblad", params);
                meta.tolerances = json!("truncated Fock space, Taylor propagation to machine precision");
            } else {
                for &t in &times {
                    let v = limit(t);
                    table.push(vec![fmt(t), fmt(v), fmt(limit(-t)), fmt(v)]);
                }
                meta = RunMeta::new("skewness", "shotnoise-analytic-limits", params);
                meta.tolerances = json!("closed form");
            }
            table
        }
        SkewModel::SqueezedAnalytic => {
            let sp = c.squeezed()?;
            let th = CavityParams::thermal(sp.gamma, sp.n_cl)?;
            let mut table = Table::new(vec!["t", "c3_pos", "c3_neg", "thermal_reference"]);
            for &t in &times {
                table.push(vec![
                    fmt(t),
                    fmt(c3_squeezed_equal_time(&sp, t)),
                    fmt(c3_squeezed_equal_time(&sp, -t)),
                    fmt(c_thermal_3(&th, 0.0, t, t)),
                ]);
            }
            meta = RunMeta::new("skewness", "squeezed-analytic", squeezed_json(c, &times)?);
            meta.tolerances = json!("closed form");
            table
        }
        SkewModel::SqueezedLangevin => {
            let sp = c.squeezed()?;
            let dt = c.dt.unwrap_or(0.01);
            let total = c.tf.unwrap_or(200.0 / sp.gamma);
            let n_traj = c.traj.unwrap_or(200);
            let cfg = SdeConfig::new(sp.gamma, dt, total, n_traj, c.seed());
            let pairs: Vec<(f64, f64)> = times.iter().flat_map(|&t| [(t, t), (-t, -t)]).collect();
            let per = map_squeezed(&sp, &cfg, |tr| third_moment_single(&tr.photon_number(), tr.dt, &pairs))?
                .into_iter()
                .collect::<shotnoise::Result<Vec<_>>>()?;
            let est = combine_c3(&per, pairs.len());
            let mut table = Table::new(vec!["t", "c3_pos", "c3_neg", "stderr_pos", "stderr_neg"]);
            for (k, &t) in times.iter().enumerate() {
                let (a, b) = (est[2 * k], est[2 * k + 1]);
                table.push(vec![fmt(t), fmt(a.mean), fmt(b.mean), fmt(a.stderr), fmt(b.stderr)]);
            }
            let mut params = squeezed_json(c, &times)?;
            params["dt"] = json!(dt);
            params["tf"] = json!(total);
            params["burn_in"] = json!(cfg.burn_in);
            params["traj"] = json!(n_traj);
            meta = RunMeta::new("skewness", "squeezed-langevin", params);
            meta.seeds = vec![c.seed()];
            meta.tolerances = json!("Monte Carlo standard error (stderr columns)");
            table
        }
    };
    write_outputs(&out, &table, &meta)
}

fn squeezed_json(c: &Common, times: &[f64]) -> Result<Value, CliError> {
    let sp = c.squeezed()?;
    Ok(json!({
        "gamma": sp.gamma,
        "delta": sp.delta,
        "r": sp.r,
        "ncl": sp.n_cl,
        "times": times,
    }))
}

pub fn spectroscopy(c: &Common) -> Result<(), CliError> {
    let out = c.out()?;
    let p = c.cavity()?;
    let lambdas = c.lambdas()?;
    let omegas = c.omegas()?;
    let cfg = IntegratorConfig::default();
    let mut table = Table::new(vec!["omega", "lambda", "im_chi_over_tf", "analytic_prediction", "flag_sign_flip"]);
    let mut tfs = Vec::new();
    for &omega in &omegas {
        let t_f = c.tf.unwrap_or_else(|| default_t_f(p.gamma, omega));
        tfs.push(t_f);
        for r in secular_rates(&p, omega, &lambdas, t_f, &cfg)? {
            table.push(vec![
                fmt(omega),
                fmt(r.lambda),
                fmt(r.rate),
                fmt(r.prediction),
                u8::from(r.sign_flip).to_string(),
            ]);
        }
    }
    let mut params = cavity_json(&p);
    params["omega"] = json!(omegas);
    params["lambdas"] = json!(lambdas);
    params["tf"] = json!(tfs);
    let mut meta = RunMeta::new("spectroscopy", "phase-space", params);
    meta.tolerances = json!({ "rel_tol": cfg.rel_tol, "abs_tol": cfg.abs_tol });
    write_outputs(&out, &table, &meta)
}

pub fn check(level: Level, mutation: Option<Mutation>) -> Result<(), CliError> {
    let reports: Vec<CriterionReport> = match mutation {
        Some(m) => {
            println!("formula mutation: {}", m.name());
            run_suite_with(level, &Mutated(m))
        }
        None => run_suite(level),
    };
    for r in &reports {
        println!("{}", r.line());
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("{} passed, {failed} failed", reports.len() - failed);
    if failed > 0 {
        Err(CliError::CheckFailed(failed))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::args::parse_grid;

    #[test]
    fn stride_respects_nyquist() {
        assert_eq!(stride_for(&parse_grid("-2:2:5").unwrap(), 0.01), 5);
        // |w1 + w2| up to 200 needs pi / (s dt) >= 200
        assert_eq!(stride_for(&parse_grid("-100:100:3").unwrap(), 0.01), 1);
    }
}
