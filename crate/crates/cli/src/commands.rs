use std::path::{Path, PathBuf};

use funcgls::bench::{
    parse_pairs, read_panel_covariate, read_panel_rates, rolling_forecast, synthetic_panel,
    FitConfig, Panel, PanelSpec, RollingConfig, SimPlan, SimStudy, TableFormat,
};
use funcgls::dcor::{screening_table, Sample};
use funcgls::fgls::FglsFit;
use funcgls::fgls::{write_beta_csv, write_summary, ReportFormat};
use funcgls::funcdata::FunctionalSample;
use funcgls::numfmt::{f2, g6};
use funcgls::Error;

use crate::files::{in_file, named, read_curves, read_scalars, read_text, CliError, OutDir};
use crate::{Common, Format, ModelArgs};

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn table_format(f: Format) -> TableFormat {
    match f {
        Format::Csv => TableFormat::Csv,
        Format::Markdown => TableFormat::Markdown,
    }
}

fn ext(f: Format) -> &'static str {
    match f {
        Format::Csv => "csv",
        Format::Markdown => "md",
    }
}

fn require_seed(common: &Common, command: &str) -> Result<u64, CliError> {
    common
        .seed
        .ok_or_else(|| Error::Config(format!("--seed is required for {command}")).into())
}

/// The config file followed by the positional `key=value` settings.
fn config_text(common: &Common, settings: &[String]) -> Result<String, CliError> {
    let mut text = match &common.config {
        Some(path) => read_text(path)?,
        None => String::new(),
    };
    if !text.is_empty() && !text.ends_with('\n') {
        text.push('\n');
    }
    for s in settings {
        if !s.contains('=') {
            return Err(Error::Config(format!("expected key=value, got {s:?}")).into());
        }
        text.push_str(s);
        text.push('\n');
    }
    Ok(text)
}

fn fit_config(common: &Common, model: &ModelArgs) -> Result<FitConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => FitConfig::from_config(&read_text(path)?).map_err(in_file(path))?,
        None => FitConfig::default(),
    };
    let flags = [
        ("method", model.method.clone()),
        ("basis", model.basis.clone()),
        ("k", model.k.clone()),
        ("covariance", model.covariance.clone()),
        ("theta", model.theta.map(|t| t.to_string())),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, &v)
                .map_err(|e| Error::Config(format!("--{key}: {e}")))?;
        }
    }
    Ok(cfg)
}

fn fit_model(
    common: &Common,
    model: &ModelArgs,
) -> Result<(FglsFit, Vec<FunctionalSample>), CliError> {
    let cfg = fit_config(common, model)?;
    let xs = model
        .x
        .iter()
        .map(|p| read_curves(p))
        .collect::<Result<Vec<_>, _>>()?;
    let y = read_scalars(&model.y)?;
    let fit = cfg.fit(&y, &xs)?;
    Ok((fit, xs))
}

pub fn fit(common: &Common, model: &ModelArgs) -> Result<(), CliError> {
    let (fit, _) = fit_model(common, model)?;
    let out = OutDir::create(&common.out)?;
    let format = match common.format {
        Format::Csv => ReportFormat::Csv,
        Format::Markdown => ReportFormat::Markdown,
    };
    out.write(&format!("summary.{}", ext(common.format)), |w| {
        write_summary(&fit, w, format)
    })?;
    out.write("beta.csv", |w| write_beta_csv(&fit, w))
}

pub fn predict(
    common: &Common,
    model: &ModelArgs,
    new: &[PathBuf],
    horizons: &[i64],
) -> Result<(), CliError> {
    if new.len() != model.x.len() {
        return Err(Error::Config(format!(
            "{} --new files for {} covariates",
            new.len(),
            model.x.len()
        ))
        .into());
    }
    let (fit, _) = fit_model(common, model)?;
    let new = new
        .iter()
        .map(|p| read_curves(p))
        .collect::<Result<Vec<_>, _>>()?;
    let q = new[0].len();
    let horizons: Vec<i64> = if horizons.is_empty() {
        (1..=q as i64).collect()
    } else {
        horizons.to_vec()
    };
    let p = funcgls::fgls::predict(&fit, &new, &horizons)?;
    let rows: Vec<[String; 5]> = (0..horizons.len())
        .map(|j| {
            let cell = |v: f64| match common.format {
                Format::Csv => g6(v),
                Format::Markdown => f2(v),
            };
            [
                horizons[j].to_string(),
                cell(p.point[j]),
                cell(p.variance[(j, j)].max(0.0).sqrt()),
                cell(p.regression_part[j]),
                cell(p.correction_part[j]),
            ]
        })
        .collect();
    let header = ["horizon", "prediction", "sd", "regression", "correction"];
    let out = OutDir::create(&common.out)?;
    out.write(&format!("predictions.{}", ext(common.format)), |w| {
        match common.format {
            Format::Csv => {
                writeln!(w, "{}", header.join(","))?;
                for r in &rows {
                    writeln!(w, "{}", r.join(","))?;
                }
            }
            Format::Markdown => {
                writeln!(
                    w,
                    "| {} |\n|{}",
                    header.join(" | "),
                    "--:|".repeat(header.len())
                )?;
                for r in &rows {
                    writeln!(w, "| {} |", r.join(" | "))?;
                }
            }
        }
        Ok(())
    })?;
    if p.clipped {
        eprintln!("warning: negative forecast variance clipped to 0");
    }
    Ok(())
}

pub fn simulate(common: &Common, settings: &[String]) -> Result<(), CliError> {
    let seed = require_seed(common, "simulate")?;
    let mut plan = SimPlan::from_config(&config_text(common, settings)?, seed)?;
    plan.seed = seed;
    let study = SimStudy::run(&plan)?;
    let out = OutDir::create(&common.out)?;
    let format = table_format(common.format);
    for t in 1..=4 {
        out.write(&format!("table{t}.{}", ext(common.format)), |w| {
            study.write_table(t, format, w)
        })?;
    }
    out.write("records.csv", |w| study.write_records_csv(w))?;
    out.write("failures.csv", |w| study.write_failures_csv(w))?;
    out.write("manifest.txt", |w| {
        writeln!(w, "# funcgls {VERSION} simulate")?;
        write!(w, "{}", plan.to_config())?;
        Ok(())
    })
}

pub fn dcor(
    common: &Common,
    covariates: &[String],
    scalars: &[String],
    responses: &[String],
) -> Result<(), CliError> {
    let curves = covariates
        .iter()
        .map(|a| named(a).and_then(|(n, p)| Ok((n, read_curves(&p)?))))
        .collect::<Result<Vec<_>, _>>()?;
    let scalar = |args: &[String]| {
        args.iter()
            .map(|a| named(a).and_then(|(n, p)| Ok((n, read_scalars(&p)?))))
            .collect::<Result<Vec<_>, CliError>>()
    };
    let scalars = scalar(scalars)?;
    let responses = scalar(responses)?;
    let candidates: Vec<(String, Sample)> = curves
        .iter()
        .map(|(n, c)| (n.clone(), Sample::Curves(c)))
        .chain(scalars.iter().map(|(n, v)| (n.clone(), Sample::Scalars(v))))
        .collect();
    let responses: Vec<(String, Sample)> = responses
        .iter()
        .map(|(n, v)| (n.clone(), Sample::Scalars(v)))
        .collect();
    let table = screening_table(&candidates, &responses)?;
    let out = OutDir::create(&common.out)?;
    out.write(&format!("dcor.{}", ext(common.format)), |w| {
        match common.format {
            Format::Csv => table.write_csv(w),
            Format::Markdown => table.write_markdown(w),
        }
    })
}

/// Keys of the synthetic panel generator, prefixed `panel_` in roll settings.
fn set_panel(spec: &mut PanelSpec, key: &str, value: &str) -> funcgls::Result<()> {
    let bad = || Error::Config(format!("{key}: cannot parse {value:?}"));
    match key {
        "panel_groups" => spec.groups = value.parse().map_err(|_| bad())?,
        "panel_weeks" => spec.weeks = value.parse().map_err(|_| bad())?,
        "panel_phi" => spec.phi = value.parse().map_err(|_| bad())?,
        "panel_noise_sd" => spec.noise_sd = value.parse().map_err(|_| bad())?,
        "panel_points" => spec.points = value.parse().map_err(|_| bad())?,
        _ => return Err(Error::Config(format!("unknown key {key:?}"))),
    }
    Ok(())
}

pub fn roll(
    common: &Common,
    rates: Option<&Path>,
    covariates: &[String],
    lag_rate: Option<usize>,
    settings: &[String],
) -> Result<(), CliError> {
    let seed = require_seed(common, "roll")?;
    let text = config_text(common, settings)?;
    // panel_* lines are blanked so the remaining line numbers stay valid
    let mut panel_settings = Vec::new();
    let rolling_text: String = text
        .lines()
        .zip(1..)
        .map(|(line, no)| {
            let key = line
                .split('=')
                .next()
                .unwrap_or("")
                .trim()
                .to_ascii_lowercase();
            if key.starts_with("panel_") {
                panel_settings.push((no, line.to_string()));
                String::new()
            } else {
                line.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    let mut cfg = RollingConfig::from_config(&rolling_text)?;

    let mut panel = match rates {
        Some(path) => {
            if !panel_settings.is_empty() {
                return Err(Error::Config(
                    "panel_* settings only apply to the synthetic panel".into(),
                )
                .into());
            }
            let file = std::fs::File::open(path).map_err(|e| in_file(path)(e.into()))?;
            let mut panel = Panel::new(&read_panel_rates(file).map_err(in_file(path))?)
                .map_err(in_file(path))?;
            for arg in covariates {
                let (name, p) = named(arg)?;
                let file = std::fs::File::open(&p).map_err(|e| in_file(&p)(e.into()))?;
                let (grid, rows) = read_panel_covariate(file).map_err(in_file(&p))?;
                panel
                    .add_covariate(&name, grid, rows)
                    .map_err(in_file(&p))?;
            }
            panel
        }
        None => {
            if !covariates.is_empty() {
                return Err(Error::Config("--covariate needs --rates".into()).into());
            }
            let maxh = cfg.horizons.iter().copied().max().unwrap_or(1);
            let first = cfg.first_origin.unwrap_or(cfg.n_train + maxh - 1);
            let mut spec = PanelSpec {
                weeks: first + cfg.origins + maxh,
                seed,
                ..PanelSpec::default()
            };
            for (no, line) in &panel_settings {
                for (_, k, v) in parse_pairs(line)? {
                    set_panel(&mut spec, &k, &v)
                        .map_err(|e| Error::Config(format!("line {no}: {e}")))?;
                }
            }
            synthetic_panel(&spec)?
        }
    };
    if let Some(len) = lag_rate {
        panel.add_lagged_rate("rate", len)?;
    }
    if cfg.covariate_sets.is_empty() {
        cfg.covariate_sets = panel
            .covariate_names()
            .into_iter()
            .map(|c| vec![c.to_string()])
            .collect();
    }
    let report = rolling_forecast(&panel, &cfg)?;
    let out = OutDir::create(&common.out)?;
    out.write(&format!("rolling.{}", ext(common.format)), |w| {
        report.write_table(table_format(common.format), w)
    })?;
    out.write("forecasts.csv", |w| report.write_forecasts_csv(w))?;
    out.write("gaps.csv", |w| report.write_gaps_csv(w))?;
    out.write("manifest.txt", |w| {
        writeln!(w, "# funcgls {VERSION} roll")?;
        writeln!(w, "seed = {seed}")?;
        match rates {
            Some(p) => writeln!(w, "# rates: {}", p.display())?,
            None => writeln!(w, "# synthetic panel")?,
        }
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            writeln!(w, "{}", line.trim())?;
        }
        Ok(())
    })
}
