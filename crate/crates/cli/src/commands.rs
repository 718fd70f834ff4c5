use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rmt_core::ensembles::{sample_spectra, Ensemble};
use rmt_core::kernels::{FiniteKernel, PreparedKernel};
use rmt_core::limits::{
    bessel_kernel_closed, build_perturbed_params, hard_edge_scan, interpolate_scan, kernel_i, kernel_ii,
    kernel_iii, ScanTable,
};
use serde::de::DeserializeOwned;
use serde_json::json;

use crate::config::{
    check_finite, regime_of, DensityConfig, KernelConfig, LimitKind, LimitSpec, SampleConfig, ScanConfig,
    ScanKind, ValidateConfig,
};
use crate::output::{fmt_f64, fmt_opt, sha256_hex, Manifest, Table};
use crate::CliError;

pub struct Context {
    pub command: &'static str,
    pub config_path: PathBuf,
    pub config_bytes: Vec<u8>,
    pub out: PathBuf,
    pub threads: usize,
    pub assert_trend: bool,
}

struct Run<'a> {
    ctx: &'a Context,
    value: serde_json::Value,
    seed: Option<u64>,
    outputs: Vec<String>,
}

impl Context {
    fn parse<T: DeserializeOwned>(&self) -> Result<(T, Run<'_>), CliError> {
        let where_ = self.config_path.display();
        let cfg: T = serde_json::from_slice(&self.config_bytes)
            .map_err(|e| CliError::Config(format!("{where_}: {e}")))?;
        let value: serde_json::Value =
            serde_json::from_slice(&self.config_bytes).map_err(|e| CliError::Config(format!("{where_}: {e}")))?;
        check_finite(&value, "$").map_err(CliError::Config)?;
        Ok((cfg, Run { ctx: self, value, seed: None, outputs: Vec::new() }))
    }
}

impl Run<'_> {
    fn write_table(&mut self, name: &str, t: &Table) -> Result<(), CliError> {
        let path = self.ctx.out.join(name);
        t.write(&path)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    /// Writes the manifest with the exit code of `result`, then returns it.
    fn finish(self, summary: serde_json::Value, result: Result<(), CliError>) -> Result<(), CliError> {
        let code = result.as_ref().map(|_| 0).unwrap_or_else(|e| e.code() as i32);
        let m = Manifest {
            tool: "rmt-kit",
            version: env!("CARGO_PKG_VERSION"),
            command: self.ctx.command.to_string(),
            config_path: self.ctx.config_path.display().to_string(),
            config_sha256: sha256_hex(&self.ctx.config_bytes),
            config: self.value,
            seed: self.seed,
            threads: self.ctx.threads,
            outputs: self.outputs,
            exit_code: code,
            summary,
        };
        m.write(&self.ctx.out)?;
        result
    }
}

fn ensemble_label(e: &Ensemble) -> String {
    format!("{:?} N={} M={} kappa={} nu={}", e.kind(), e.n(), e.m(), e.kappa(), e.nu()).to_lowercase()
}

pub fn validate(ctx: &Context) -> Result<(), CliError> {
    let (cfg, run): (ValidateConfig, _) = ctx.parse()?;
    if cfg.ensemble.is_none() && cfg.perturbed.is_none() {
        return Err(CliError::Config("config needs an `ensemble` or a `perturbed` block".into()));
    }
    let mut problems = Vec::new();
    if let Some(e) = &cfg.ensemble {
        if let Err(err) = e.validate() {
            problems.push(err);
        }
    }
    if let Some(p) = &cfg.perturbed {
        if let Err(err) = build_perturbed_params(p.n, p.mu, &p.perturbations) {
            problems.push(err);
        }
    }
    let mut lines = Vec::new();
    for err in &problems {
        match err {
            rmt_core::Error::Validation(v) => lines.extend(v.iter().cloned()),
            other => lines.push(other.to_string()),
        }
    }
    if lines.is_empty() {
        println!("constraints satisfied");
        run.finish(json!({"valid": true}), Ok(()))
    } else {
        for l in &lines {
            println!("violated: {l}");
        }
        let msg = lines.join("; ");
        run.finish(json!({"valid": false, "violations": lines}), Err(CliError::Params(msg)))
    }
}

fn limit_value(l: &LimitSpec, x: f64, y: f64) -> rmt_core::Result<f64> {
    let nu_u = || -> rmt_core::Result<u32> {
        u32::try_from(l.nu).map_err(|_| rmt_core::Error::Parameter(format!("nu = {} must be >= 0 here", l.nu)))
    };
    match l.kernel {
        LimitKind::III => kernel_iii(&l.perturbations, l.nu, x, y),
        LimitKind::II => kernel_ii(
            &l.perturbations,
            l.tau.ok_or_else(|| rmt_core::Error::Parameter("kernel II needs tau".into()))?,
            l.kappa,
            nu_u()?,
            x,
            y,
        ),
        LimitKind::I => kernel_i(&l.perturbations, l.kappa, nu_u()?, x, y, l.route),
        LimitKind::Bessel => Ok(bessel_kernel_closed(nu_u()?, x, y)),
    }
}

pub fn kernel(ctx: &Context) -> Result<(), CliError> {
    let (cfg, mut run): (KernelConfig, _) = ctx.parse()?;
    let cells: Vec<(f64, f64)> = cfg.x.iter().flat_map(|&x| cfg.y.iter().map(move |&y| (x, y))).collect();
    if cells.is_empty() {
        return Err(CliError::Config("empty x or y grid".into()));
    }
    let (comment, results): (String, Vec<rmt_core::Result<(f64, Option<f64>)>>) = match (&cfg.ensemble, &cfg.limit) {
        (Some(e), None) => {
            let fk = FiniteKernel::new(e.clone(), cfg.method).with_tol(cfg.tol).with_gauge(cfg.gauge);
            let pk = PreparedKernel::new(fk)?;
            let comment = format!(
                "rmt-kit kernel: {} via {:?}, tol {:e}\ngauge: {}\nunits: x, y are squared singular values; rows row-major over x then y",
                ensemble_label(e),
                cfg.method,
                cfg.tol,
                cfg.gauge.describe()
            );
            let res = cells
                .par_iter()
                .map(|&(x, y)| pk.eval_with_error(x, y).map(|v| (v.value, Some(v.est_error))))
                .collect();
            (comment, res)
        }
        (None, Some(l)) => {
            if let Some(r) = regime_of(l.kernel) {
                l.perturbations.validate(r, l.tau)?;
            }
            let gauge = match l.kernel {
                LimitKind::III => "double contour form as written, no prefactor; at n=m=0 equals 4 (y/x)^(nu/2) K_Bessel(4x,4y)",
                LimitKind::Bessel => "standard Bessel kernel (J_nu(sqrt x) sqrt(y) J_nu'(sqrt y) - sqrt(x) J_nu'(sqrt x) J_nu(sqrt y)) / (2(x-y))",
                _ => "(x/y)^(kappa/2) prefactor of the double contour form",
            };
            let comment = format!(
                "rmt-kit kernel: limiting kernel {:?}, kappa={}, nu={}, tau={:?}, pi_hat={:?}, theta_hat={:?}\ngauge: {gauge}\nunits: x, y are scaled hard-edge variables; rows row-major over x then y",
                l.kernel, l.kappa, l.nu, l.tau, l.perturbations.pi_hat, l.perturbations.theta_hat
            );
            let res = cells.par_iter().map(|&(x, y)| limit_value(l, x, y).map(|v| (v, None))).collect();
            (comment, res)
        }
        _ => return Err(CliError::Config("config needs exactly one of `ensemble` and `limit`".into())),
    };
    let mut t = Table::new(comment, &["x", "y", "value", "est_error", "status"]);
    let mut first_err: Option<CliError> = None;
    let mut failed = 0usize;
    for ((x, y), r) in cells.iter().zip(results) {
        match r {
            Ok((v, e)) => t.push(vec![fmt_f64(*x), fmt_f64(*y), fmt_f64(v), fmt_opt(e), "ok".into()]),
            Err(err) => {
                failed += 1;
                t.push(vec![fmt_f64(*x), fmt_f64(*y), String::new(), String::new(), err.to_string()]);
                first_err.get_or_insert(err.into());
            }
        }
    }
    run.write_table("kernel.csv", &t)?;
    let result = match first_err {
        Some(e) => Err(e),
        None => Ok(()),
    };
    run.finish(json!({"cells": cells.len(), "failed": failed}), result)
}

pub fn sample(ctx: &Context) -> Result<(), CliError> {
    let (cfg, mut run): (SampleConfig, _) = ctx.parse()?;
    run.seed = Some(cfg.seed);
    cfg.ensemble.validate()?;
    let spectra = sample_spectra(&cfg.ensemble, cfg.seed, cfg.count)?;
    let n = cfg.ensemble.n();
    let mut header = vec!["sample".to_string()];
    header.extend((1..=n).map(|i| format!("v{i}")));
    let hdr: Vec<&str> = header.iter().map(String::as_str).collect();
    let comment = format!(
        "rmt-kit sample: {}, seed {}, count {}\ngauge: none (raw spectra)\nunits: squared singular values of the product matrix, ascending per row",
        ensemble_label(&cfg.ensemble),
        cfg.seed,
        cfg.count
    );
    let mut t = Table::new(comment, &hdr);
    for (i, s) in spectra.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(s.values.iter().map(|v| fmt_f64(*v)));
        t.push(row);
    }
    run.write_table("samples.csv", &t)?;
    let summary = json!({
        "count": cfg.count,
        "N": n,
        "kappa": cfg.ensemble.kappa(),
        "nu": cfg.ensemble.nu(),
    });
    run.finish(summary, Ok(()))
}

fn read_samples(path: &Path, n: usize) -> Result<Vec<f64>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if rec.len() != n + 1 {
            return Err(CliError::Config(format!(
                "{}: row {} has {} values, ensemble has N = {n}",
                path.display(),
                i + 1,
                rec.len().saturating_sub(1)
            )));
        }
        for f in rec.iter().skip(1) {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{}: row {}: {f:?} is not a number", path.display(), i + 1)))?;
            out.push(v);
        }
    }
    Ok(out)
}

pub fn density(ctx: &Context) -> Result<(), CliError> {
    let (cfg, mut run): (DensityConfig, _) = ctx.parse()?;
    let g = &cfg.grid;
    if g.points < 2 || !(g.t_min >= 0.0 && g.t_max > g.t_min) {
        return Err(CliError::Config("grid needs points >= 2 and 0 <= t_min < t_max".into()));
    }
    let n = cfg.ensemble.n();
    let samples = match &cfg.samples {
        Some(p) => {
            let p = if p.is_relative() {
                ctx.config_path.parent().unwrap_or(Path::new(".")).join(p)
            } else {
                p.clone()
            };
            read_samples(&p, n)?
        }
        None => Vec::new(),
    };
    let pk = PreparedKernel::new(FiniteKernel::new(cfg.ensemble.clone(), cfg.method))?;
    let dt = (g.t_max - g.t_min) / (g.points - 1) as f64;
    let ts: Vec<f64> = (0..g.points).map(|i| g.t_min + i as f64 * dt).collect();
    // the diagonal is finite at t = 0 only for some parameters; nudge it
    let rho: Vec<rmt_core::Result<f64>> = ts
        .par_iter()
        .map(|&t| {
            let t = if t == 0.0 { 1e-300 } else { t };
            pk.eval(t, t)
        })
        .collect();
    let chi = if samples.is_empty() { None } else { Some(pk.chi_square(&samples, cfg.bins)?) };
    let empirical = |t: f64| -> Option<f64> {
        let c = chi.as_ref()?;
        let k = c.edges.partition_point(|e| *e <= t).clamp(1, c.observed.len()) - 1;
        let w = c.edges[k + 1] - c.edges[k];
        if !w.is_finite() {
            return None;
        }
        Some(c.observed[k] as f64 / (samples.len() as f64 * w) * n as f64)
    };
    let comment = format!(
        "rmt-kit density: {}, method {:?}\ngauge: gauge-free (diagonal K(t,t))\nunits: t is a squared singular value; rho1 integrates to N; empirical is N times the pooled histogram density on equal-probability bins",
        ensemble_label(&cfg.ensemble),
        cfg.method
    );
    let mut t = Table::new(comment, &["t", "rho1", "rho1_over_N", "empirical", "status"]);
    let mut first_err = None;
    let mut trace = 0.0;
    for (i, (tv, r)) in ts.iter().zip(rho).enumerate() {
        match r {
            Ok(v) => {
                let w = if i == 0 || i + 1 == g.points { 0.5 } else { 1.0 };
                trace += w * v * dt;
                t.push(vec![fmt_f64(*tv), fmt_f64(v), fmt_f64(v / n as f64), fmt_opt(empirical(*tv)), "ok".into()]);
            }
            Err(e) => {
                t.push(vec![fmt_f64(*tv), String::new(), String::new(), fmt_opt(empirical(*tv)), e.to_string()]);
                first_err.get_or_insert(CliError::from(e));
            }
        }
    }
    run.write_table("density.csv", &t)?;
    let mut summary = json!({"N": n, "trace_trapezoid": trace, "points": g.points});
    if let Some(c) = &chi {
        let mut ct = Table::new(
            format!("rmt-kit density: chi-square bins, {} pooled values\ngauge: n/a\nunits: bin edges in squared singular values", samples.len()),
            &["bin", "lower", "upper", "observed", "expected"],
        );
        for k in 0..c.observed.len() {
            ct.push(vec![
                k.to_string(),
                fmt_f64(c.edges[k]),
                fmt_f64(c.edges[k + 1]),
                c.observed[k].to_string(),
                fmt_f64(c.expected),
            ]);
        }
        run.write_table("chi2.csv", &ct)?;
        println!("chi2 = {:.6} dof = {} p = {:.6}", c.statistic, c.dof, c.p_value);
        summary["chi2"] = json!({"statistic": c.statistic, "dof": c.dof, "p_value": c.p_value, "values": samples.len()});
    }
    run.finish(summary, first_err.map_or(Ok(()), Err))
}

fn scan_table(cfg: &ScanConfig) -> Result<ScanTable, CliError> {
    match cfg.scan {
        ScanKind::HardEdge => {
            let r = cfg.regime.as_ref().ok_or_else(|| CliError::Config("hard-edge scan needs `regime`".into()))?;
            let s = cfg.schedule.as_ref().ok_or_else(|| CliError::Config("hard-edge scan needs `schedule`".into()))?;
            if cfg.n_list.is_empty() {
                return Err(CliError::Config("hard-edge scan needs a non-empty `N_list`".into()));
            }
            Ok(hard_edge_scan(r, s, &cfg.n_list, &cfg.probes)?)
        }
        ScanKind::Interpolate => {
            let d = cfg.direction.ok_or_else(|| CliError::Config("interpolation scan needs `direction`".into()))?;
            if cfg.tau_list.is_empty() {
                return Err(CliError::Config("interpolation scan needs a non-empty `tau_list`".into()));
            }
            Ok(interpolate_scan(&cfg.perturbations, cfg.kappa, cfg.nu, &cfg.tau_list, d, &cfg.probes)?)
        }
    }
}

pub fn scan(ctx: &Context) -> Result<(), CliError> {
    let (cfg, mut run): (ScanConfig, _) = ctx.parse()?;
    if cfg.probes.is_empty() {
        return Err(CliError::Config("`probes` is empty".into()));
    }
    if ctx.assert_trend && cfg.ladder_len() < 3 {
        return Err(CliError::Config(format!(
            "--assert-trend needs at least 3 ladder points, got {}",
            cfg.ladder_len()
        )));
    }
    let table = scan_table(&cfg)?;
    let pname = if cfg.scan == ScanKind::HardEdge { "N" } else { "tau" };
    let comment = format!(
        "rmt-kit scan: {} {}\ngauge: finite kernel in the (y/x)^(kappa/2) gauge, rescaled per regime\nunits: x, y are scaled hard-edge variables; rel_error = |finite - limit| / |limit|",
        match cfg.scan {
            ScanKind::HardEdge => "hard-edge",
            ScanKind::Interpolate => "interpolation",
        },
        cfg.regime_label()
    );
    let mut t = Table::new(comment, &[pname, "x", "y", "finite", "limit", "rel_error", "est_error", "status"]);
    let mut failed = 0;
    for r in &table.rows {
        let status = match &r.error {
            Some(e) => {
                failed += 1;
                e.clone()
            }
            None => "ok".into(),
        };
        let param = if cfg.scan == ScanKind::HardEdge { format!("{}", r.param as usize) } else { fmt_f64(r.param) };
        t.push(vec![
            param,
            fmt_f64(r.x),
            fmt_f64(r.y),
            fmt_opt(r.finite),
            fmt_opt(r.limit),
            fmt_opt(r.rel_error),
            fmt_opt(r.est_error),
            status,
        ]);
    }
    run.write_table("scan.csv", &t)?;
    let monotone = table.is_monotone();
    let per_probe: Vec<_> = (0..table.probes.len())
        .map(|k| json!({"probe": table.probes[k], "rel_errors": table.errors_at(k)}))
        .collect();
    let summary = json!({
        "rows": t.len(),
        "failed_cells": failed,
        "monotone": monotone,
        "final_max_rel_error": table.final_error(),
        "probes": per_probe,
    });
    let result = if ctx.assert_trend && !monotone {
        Err(CliError::Assertion("relative errors do not decrease strictly along the ladder".into()))
    } else if failed > 0 {
        Err(CliError::Numeric(format!("{failed} scan cells failed")))
    } else {
        Ok(())
    };
    println!("monotone = {monotone}, final max rel error = {:?}", table.final_error());
    run.finish(summary, result)
}
