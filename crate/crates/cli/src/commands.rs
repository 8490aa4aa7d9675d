//! Command implementations; each returns the report text and exit status.

use crate::config::{file_digest, RunConfig};
use crate::{Command, GenericArgs, KourganoffCommand, Outcome, PerturbCommand, Usage};
use anyhow::{bail, Context, Result};
use sinai_core::dynamics::crofton_check;
use sinai_core::enriched::enriched_spectrum_with;
use sinai_core::geometry::tablefile::{fmt17, read_table_file, write_table_file};
use sinai_core::geometry::{Table, TableOptions};
use sinai_core::kourganoff::{closed_geodesic_in_class, convergence_test, HeightProfile};
use sinai_core::perturbation::{
    degraze_with, first_order_response, replay_log, separate_lengths_with, BumpField, BumpMode, GenericityOptions, GenericityReport,
};
use sinai_core::report::{
    closed_geodesic_report, compare_enriched, compare_spectra, convergence_report, enriched_report, genericity_report, parse_enriched_report,
    parse_log, response_report, spectrum_report, ReportHeader,
};
use sinai_core::spectrum::{enumerate_spectrum_with, find_generalized_orbit, EnumerationOptions, OrbitWord};
use std::fmt::Write;
use std::path::Path;

/// Convergence rows may grow by this fraction and still count as monotone.
const MONOTONE_SLACK: f64 = 0.1;

pub fn dispatch(cmd: &Command, cfg: &RunConfig) -> Result<Outcome> {
    match cmd {
        Command::Validate { table } => validate(cfg, table),
        Command::Horizon { table } => horizon(cfg, table),
        Command::Spectrum { table } => spectrum(cfg, table),
        Command::Enriched { table } => enriched(cfg, table),
        Command::Compare { a, b } => compare(cfg, a, b),
        Command::Perturb(p) => perturb(cfg, p),
        Command::Kourganoff(k) => kourganoff(cfg, k),
        Command::Crofton { length, samples } => crofton(cfg, *length, *samples),
    }
}

fn ok(report: String) -> Outcome {
    Outcome { report, code: 0 }
}

fn options(cfg: &RunConfig) -> TableOptions {
    TableOptions { lattice_bound: cfg.lattice_bound, ..TableOptions::default() }
}

fn load(cfg: &RunConfig, path: &Path) -> Result<Table> {
    let curves = read_table_file(path).with_context(|| format!("reading table {}", path.display()))?;
    Ok(Table::with_options(curves, options(cfg)).with_context(|| format!("building table {}", path.display()))?)
}

/// Header for a job on the given input files.
fn header(cfg: &RunConfig, job: &str, inputs: &[&Path], extra: &[String]) -> Result<ReportHeader> {
    let mut lines = vec![job.to_string()];
    for p in inputs {
        lines.push(file_digest(p)?);
    }
    lines.extend_from_slice(extra);
    Ok(ReportHeader::new(cfg.hash(&lines), cfg.seed))
}

fn enumeration(cfg: &RunConfig) -> Result<EnumerationOptions> {
    cfg.require_q_max()?;
    let mut opts = EnumerationOptions::new(cfg.q_max, cfg.t_max);
    opts.solver.tol_crit = cfg.tol_crit;
    Ok(opts)
}

fn validate(cfg: &RunConfig, path: &Path) -> Result<Outcome> {
    let h = header(cfg, "validate", &[path], &[])?;
    let mut out = String::new();
    h.render("validate", &mut out);
    let curves = match read_table_file(path) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(out, "parse\tfail\t{e}");
            return Ok(Outcome { report: out, code: 2 });
        }
    };
    let _ = writeln!(out, "parse\tpass\t{} scatterers", curves.len());
    for (l, c) in curves.iter().enumerate() {
        let (theta, r) = c.min_radius_of_curvature(c.scan_resolution());
        let _ = writeln!(out, "convexity\tpass\tscatterer {l}: min radius of curvature {} at angle {}", fmt17(r), fmt17(theta));
    }
    let table = match Table::with_options(curves, options(cfg)) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(out, "disjoint\tfail\t{e}");
            return Ok(Outcome { report: out, code: 2 });
        }
    };
    let (gap, (a, b)) = table.min_clearance();
    let _ = writeln!(out, "disjoint\tpass\tmin clearance {} between {} and {} in cell ({},{})", fmt17(gap), a.scatterer, b.scatterer, b.cell[0], b.cell[1]);
    let cert = table.horizon();
    if cert.is_finite() {
        let _ = writeln!(out, "horizon\tpass\tfinite, tau_max <= {}", fmt17(cert.tau_max_bound));
        Ok(ok(out))
    } else {
        let w = cert.witness.as_ref().map_or("no witness".to_string(), |w| {
            format!("corridor direction ({},{}) offsets [{}, {}]", w.direction[0], w.direction[1], fmt17(w.gap.0), fmt17(w.gap.1))
        });
        let _ = writeln!(out, "horizon\tfail\t{w}");
        Ok(Outcome { report: out, code: 2 })
    }
}

fn horizon(cfg: &RunConfig, path: &Path) -> Result<Outcome> {
    let table = load(cfg, path)?;
    let h = header(cfg, "horizon", &[path], &[])?;
    let cert = table.horizon();
    let mut out = String::new();
    h.render("horizon", &mut out);
    let _ = writeln!(out, "lattice_bound\t{}", cert.lattice_bound);
    let _ = writeln!(out, "tau_min\t{}", fmt17(table.tau_min()));
    let _ = writeln!(out, "k_min\t{}", fmt17(table.k_min()));
    let _ = writeln!(out, "k_max\t{}", fmt17(table.k_max()));
    if cert.is_finite() {
        let _ = writeln!(out, "status\tfinite\ntau_max_bound\t{}", fmt17(cert.tau_max_bound));
        Ok(ok(out))
    } else {
        let _ = writeln!(out, "status\tcorridor");
        if let Some(w) = &cert.witness {
            let _ = writeln!(out, "direction\t{} {}\ngap\t{} {}", w.direction[0], w.direction[1], fmt17(w.gap.0), fmt17(w.gap.1));
        }
        Ok(Outcome { report: out, code: 2 })
    }
}

fn spectrum(cfg: &RunConfig, path: &Path) -> Result<Outcome> {
    let opts = enumeration(cfg)?;
    let table = load(cfg, path)?;
    let spec = enumerate_spectrum_with(&table, &opts)?;
    let report = spectrum_report(&header(cfg, "spectrum", &[path], &[])?, &spec);
    Ok(Outcome { report, code: if spec.truncated { 4 } else { 0 } })
}

fn enriched(cfg: &RunConfig, path: &Path) -> Result<Outcome> {
    let mut opts = enumeration(cfg)?;
    opts.transition_pruning = false;
    let table = load(cfg, path)?;
    let spec = enriched_spectrum_with(&table, &opts)?;
    let report = enriched_report(&header(cfg, "enriched", &[path], &[])?, &spec, &table);
    Ok(Outcome { report, code: if spec.truncated { 4 } else { 0 } })
}

fn is_report(path: &Path) -> Result<bool> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.starts_with("# sinai"))
}

fn compare(cfg: &RunConfig, a: &Path, b: &Path) -> Result<Outcome> {
    let h = header(cfg, "compare", &[a, b], &[])?;
    let report = match (is_report(a)?, is_report(b)?) {
        (true, true) => {
            let (ra, ta) = parse_enriched_report(&std::fs::read_to_string(a)?)?;
            let (rb, tb) = parse_enriched_report(&std::fs::read_to_string(b)?)?;
            compare_spectra(&ra, &rb, ta.min(tb))
        }
        (false, false) => {
            let mut opts = enumeration(cfg)?;
            opts.transition_pruning = false;
            let ta = load(cfg, a)?;
            let tb = load(cfg, b)?;
            if ta.len() != tb.len() {
                return Err(sinai_core::Error::IncomparableTables(format!("tables have {} and {} scatterers", ta.len(), tb.len())).into());
            }
            compare_enriched(&enriched_spectrum_with(&ta, &opts)?, &enriched_spectrum_with(&tb, &opts)?)
        }
        _ => bail!(Usage("compare needs two tables or two enriched reports".into())),
    };
    let code = if report.is_match(cfg.compare_tol) { 0 } else { 2 };
    Ok(Outcome { report: report.render(&h), code })
}

fn genericity(cfg: &RunConfig, opts: &GenericArgs) -> Result<GenericityOptions> {
    cfg.require_q_max()?;
    let mut g = GenericityOptions::new(cfg.q_max, cfg.t_max);
    if let Some(w) = opts.half_width {
        g.half_width = w;
    }
    if let Some(e) = opts.eps_max {
        g.eps_max = e;
    }
    Ok(g)
}

fn finish_generic(cfg: &RunConfig, kind: &str, path: &Path, args: &GenericArgs, g: &GenericityOptions, result: (Table, GenericityReport)) -> Result<Outcome> {
    let (table, rep) = result;
    if let Some(p) = &args.table_out {
        write_table_file(p, &table.curves())?;
    }
    let extra = vec![format!("half_width={} eps_max={} gap={}", fmt17(g.half_width), fmt17(g.eps_max), fmt17(g.gap))];
    let report = genericity_report(&header(cfg, kind, &[path], &extra)?, kind, &rep);
    Ok(Outcome { report, code: if rep.complete { 0 } else { 3 } })
}

fn perturb(cfg: &RunConfig, cmd: &PerturbCommand) -> Result<Outcome> {
    match cmd {
        PerturbCommand::Degraze { table, opts } => {
            let g = genericity(cfg, opts)?;
            let t = load(cfg, table)?;
            finish_generic(cfg, "degraze", table, opts, &g, degraze_with(&t, &g)?)
        }
        PerturbCommand::Separate { table, opts, gap } => {
            let mut g = genericity(cfg, opts)?;
            if !(*gap > 0.0) {
                bail!(Usage(format!("gap must be positive, got {gap}")));
            }
            g.gap = *gap;
            let t = load(cfg, table)?;
            finish_generic(cfg, "separate", table, opts, &g, separate_lengths_with(&t, &g)?)
        }
        PerturbCommand::Respond { table, word, scatterer, center, half_width, mode } => {
            let t = load(cfg, table)?;
            let w = OrbitWord::parse(word)?;
            let mode = BumpMode::parse(mode).ok_or_else(|| Usage(format!("unknown bump mode {mode:?}")))?;
            let field = BumpField::new(&t, *scatterer, *center, *half_width, mode)?;
            let orbit = find_generalized_orbit(&t, &w)?;
            let r = first_order_response(&t, &orbit, &field)?;
            let extra = vec![format!("{} {} {} {} {}", w, scatterer, fmt17(*center), fmt17(*half_width), mode)];
            Ok(ok(response_report(&header(cfg, "respond", &[table], &extra)?, &r)))
        }
        PerturbCommand::Replay { table, log, table_out } => {
            let t = load(cfg, table)?;
            let text = std::fs::read_to_string(log).with_context(|| format!("reading log {}", log.display()))?;
            let out = replay_log(&t, &parse_log(&text)?)?;
            write_table_file(table_out, &out.curves())?;
            let h = header(cfg, "replay", &[table, log], &[])?;
            let mut report = String::new();
            h.render("replay", &mut report);
            let _ = writeln!(report, "scatterers\t{}\ntau_min\t{}", out.len(), fmt17(out.tau_min()));
            Ok(ok(report))
        }
    }
}

fn kourganoff(cfg: &RunConfig, cmd: &KourganoffCommand) -> Result<Outcome> {
    match cmd {
        KourganoffCommand::Converge { table, starts, t_end } => {
            let t = load(cfg, table)?;
            let profile = HeightProfile::new(&t)?;
            let reports = starts
                .iter()
                .map(|s| convergence_test(&profile, [s[0], s[1]], [s[2], s[3]], *t_end, &cfg.eps_list))
                .collect::<sinai_core::Result<Vec<_>>>()?;
            let extra: Vec<String> = starts.iter().map(|s| s.map(fmt17).join(" ")).chain([fmt17(*t_end)]).collect();
            let mut report = convergence_report(&header(cfg, "kourganoff-converge", &[table], &extra)?, &reports);
            let monotone = reports.iter().all(|r| r.is_monotone(MONOTONE_SLACK));
            let _ = writeln!(report, "# monotone {monotone}");
            Ok(Outcome { report, code: if monotone { 0 } else { 2 } })
        }
        KourganoffCommand::ClosedGeodesic { table, word } => {
            let t = load(cfg, table)?;
            let profile = HeightProfile::new(&t)?;
            let w = OrbitWord::parse(word)?;
            let rows = cfg.eps_list.iter().map(|&e| closed_geodesic_in_class(&profile, e, &w)).collect::<sinai_core::Result<Vec<_>>>()?;
            Ok(ok(closed_geodesic_report(&header(cfg, "kourganoff-closed-geodesic", &[table], &[w.to_string()])?, &rows)))
        }
    }
}

fn crofton(cfg: &RunConfig, length: f64, samples: usize) -> Result<Outcome> {
    let est = crofton_check(length, samples, cfg.seed)?;
    let h = header(cfg, "crofton", &[], &[format!("{} {samples}", fmt17(length))])?;
    let z = (est.value - length).abs() / est.std_error.max(f64::MIN_POSITIVE);
    let pass = z <= 3.0;
    let mut report = String::new();
    h.render("crofton", &mut report);
    let _ = writeln!(
        report,
        "length\testimate\tstd_error\tsamples\tz\tpass\n{}\t{}\t{}\t{}\t{}\t{}",
        fmt17(length),
        fmt17(est.value),
        fmt17(est.std_error),
        est.samples,
        fmt17(z),
        pass
    );
    Ok(Outcome { report, code: if pass { 0 } else { 2 } })
}
