//! Subcommand implementations. Each builds a [`Report`] (and possibly a
//! plot table), prints it and optionally writes it to disk.

use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use relaxkit::echodecay::{
    classify_regime, concentration_criterion, crossover_diffusion, evaluate_decay,
};
use relaxkit::fitting::{
    compare_mono_stretched, fit_diffusion, fit_echo, fit_orbach, DiffusionDataset,
    DiffusionFitSpec, EchoModelKind,
};
use relaxkit::mechanisms::{compose_channels, orbach_rate};
use relaxkit::physconst::units::{
    cm2_per_s_to_si, m_to_nm, nm_to_m, s_to_us, si_to_cm2_per_s, si_to_per_cm3, us_to_s,
};
use relaxkit::physconst::{convert_energy, EnergyUnit};
use relaxkit::synth;
use relaxkit::{
    DiffusionMechanism, EchoDecayModel, FitOutcome, OrbachParams, RelaxationChannel, TimeQuantity,
};

use crate::config::{load_config, ConfigDocument};
use crate::data::{load_echo_csv, load_relaxation_csv, write_echo_csv, write_relaxation_csv};
use crate::error::{CliError, CliResult};
use crate::report::{num, opt_num, write_outputs, Report, Table};
use crate::{Command, EchoModelArg, NoiseArgs, OutputArgs, SynthCommand};

pub fn run(command: Command, stdout: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::Predict {
            config,
            temps,
            output,
        } => {
            let doc = load_config(&config)?;
            let (report, table) = predict(&doc, &path_text(&config), &temps.values())?;
            emit(
                &report,
                Some((&table, "relaxkit predict; times in microseconds")),
                &output,
                stdout,
            )
        }
        Command::FitOrbach {
            data,
            config,
            unweighted,
            output,
        } => {
            let weighted = match &config {
                Some(c) => load_config(c)?.fit.weighted && !unweighted,
                None => !unweighted,
            };
            let (report, table, converged) = fit_orbach_cmd(&data, weighted)?;
            emit(
                &report,
                Some((&table, "relaxkit fit-orbach")),
                &output,
                stdout,
            )?;
            check_converged(converged)
        }
        Command::FitDiffusion {
            config,
            data,
            output,
        } => {
            let doc = load_config(&config)?;
            let (report, table, converged) = fit_diffusion_cmd(&doc, &path_text(&config), &data)?;
            emit(
                &report,
                Some((&table, "relaxkit fit-diffusion; times in microseconds")),
                &output,
                stdout,
            )?;
            check_converged(converged)
        }
        Command::FitEcho {
            data,
            model,
            n,
            compare,
            output,
        } => {
            let (report, table, converged) = fit_echo_cmd(&data, model, n, compare)?;
            emit(
                &report,
                Some((&table, "relaxkit fit-echo; tau in microseconds")),
                &output,
                stdout,
            )?;
            check_converged(converged)
        }
        Command::Regime {
            config,
            diffusion,
            output,
        } => {
            let doc = load_config(&config)?;
            let report = regime(&doc, &path_text(&config), diffusion)?;
            emit(&report, None, &output, stdout)
        }
        Command::Convert {
            value,
            from,
            to,
            json,
        } => {
            let from_u: EnergyUnit = from.parse()?;
            let to_u: EnergyUnit = to.parse()?;
            if !value.is_finite() {
                return Err(CliError::input(format!(
                    "value must be finite, got {value}"
                )));
            }
            let result = convert_energy(value, from_u, to_u);
            let text = if json {
                let v = json!({"value": num(value), "from": from_u.symbol(), "to": to_u.symbol(), "result": num(result)});
                let mut s = serde_json::to_string_pretty(&v).expect("serializes");
                s.push('\n');
                s
            } else {
                format!("{}\n", crate::report::fmt_num(result))
            };
            write_stdout(stdout, &text)
        }
        Command::Synth { kind } => synth_cmd(kind, stdout),
    }
}

fn path_text(p: &Path) -> String {
    p.display().to_string()
}

fn write_stdout(stdout: &mut dyn Write, text: &str) -> CliResult<()> {
    stdout.write_all(text.as_bytes())?;
    stdout.flush()?;
    Ok(())
}

fn emit(
    report: &Report,
    table: Option<(&Table, &str)>,
    output: &OutputArgs,
    stdout: &mut dyn Write,
) -> CliResult<()> {
    if let Some(prefix) = &output.out {
        write_outputs(prefix, report, table)?;
    }
    let text = if output.json {
        report.to_json()
    } else {
        report.to_text()
    };
    write_stdout(stdout, &text)
}

fn check_converged(converged: bool) -> CliResult<()> {
    if converged {
        Ok(())
    } else {
        Err(CliError::NotConverged(
            "iteration limit reached; the report holds the last iterate".into(),
        ))
    }
}

fn fit_summary(fit: &FitOutcome) -> Value {
    json!({
        "chi2": num(fit.chi2),
        "reduced_chi2": num(fit.reduced_chi2),
        "degrees_of_freedom": fit.degrees_of_freedom,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "singular": fit.singular,
    })
}

/// Adds `key` and `key_stderr` for parameter `name`, multiplied by `scale`.
fn put_param(report: &mut Report, key: &str, fit: &FitOutcome, name: &str, scale: f64) {
    let p = fit.parameter(name).expect("parameter present");
    report.result(key, num(p.value * scale));
    report.result(
        &format!("{key}_stderr"),
        opt_num(p.stderr.map(|s| s * scale.abs())),
    );
    if p.fixed {
        report.result(&format!("{key}_fixed"), true);
    }
}

pub fn predict(
    doc: &ConfigDocument,
    config_name: &str,
    temps: &[f64],
) -> CliResult<(Report, Table)> {
    let channels = doc.channels()?;
    let mut report = Report::new("predict");
    report.input("config", config_name);
    report.input("field_B0_T", num(doc.field_b0));
    report.input(
        "temperatures_K",
        json!({"lo": num(temps[0]), "hi": num(*temps.last().unwrap()), "n": temps.len()}),
    );
    report.input(
        "channels",
        Value::Array(
            channels
                .iter()
                .map(|(label, ch)| json!({"label": label, "kind": ch.kind()}))
                .collect(),
        ),
    );

    let mut columns = vec!["temperature_K".to_string(), "T1_us".into(), "T2_us".into()];
    for (label, _) in &channels {
        columns.push(format!("T1_us_{label}"));
        columns.push(format!("T2_us_{label}"));
    }
    columns.push("out_of_range".into());
    let col_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = Table::new(&col_refs);

    let only: Vec<RelaxationChannel> = channels.iter().map(|(_, c)| c.clone()).collect();
    let mut t2_series = Vec::with_capacity(temps.len());
    let mut flagged = Vec::new();
    for &t in temps {
        let total = compose_channels(&only, t)?;
        let (t1, t2) = total.value.times();
        t2_series.push(t2);
        if total.out_of_range {
            flagged.push(t);
        }
        let mut row = vec![num(t), num(s_to_us(t1)), num(s_to_us(t2))];
        for (_, ch) in &channels {
            let (c1, c2) = ch.rates(t)?.value.times();
            row.push(num(s_to_us(c1)));
            row.push(num(s_to_us(c2)));
        }
        row.push(Value::Bool(total.out_of_range));
        table.push(row);
    }

    let (max_k, min_k) = interior_extrema(temps, &t2_series);
    report.result("T2_interior_maximum_K", opt_num(max_k));
    report.result("T2_interior_minimum_K", opt_num(min_k));
    report.result("curves", table.to_value());
    if !flagged.is_empty() {
        report.warnings.push(format!(
            "{} temperature(s) outside a solvent model's validity range, from {} K to {} K",
            flagged.len(),
            crate::report::fmt_num(flagged[0]),
            crate::report::fmt_num(*flagged.last().unwrap())
        ));
    }
    Ok((report, table))
}

/// Temperatures of the largest interior local maximum and smallest interior
/// local minimum of `y`, if any.
fn interior_extrema(x: &[f64], y: &[f64]) -> (Option<f64>, Option<f64>) {
    let mut max: Option<(f64, f64)> = None;
    let mut min: Option<(f64, f64)> = None;
    for i in 1..y.len().saturating_sub(1) {
        if y[i] > y[i - 1] && y[i] >= y[i + 1] && max.map_or(true, |(_, v)| y[i] > v) {
            max = Some((x[i], y[i]));
        }
        if y[i] < y[i - 1] && y[i] <= y[i + 1] && min.map_or(true, |(_, v)| y[i] < v) {
            min = Some((x[i], y[i]));
        }
    }
    (max.map(|m| m.0), min.map(|m| m.0))
}

pub fn fit_orbach_cmd(data: &Path, weighted: bool) -> CliResult<(Report, Table, bool)> {
    let (ds, warnings) = load_relaxation_csv(data, TimeQuantity::T1, "T1")?;
    let fit = fit_orbach(&ds, weighted)?;
    let mut report = Report::new("fit-orbach");
    report.warnings = warnings;
    report.input("data", path_text(data));
    report.input("points", ds.len());
    report.input("weighted", weighted);
    put_param(&mut report, "A_per_s", &fit.outcome, "A", 1.0);
    put_param(&mut report, "delta_meV", &fit.outcome, "delta_meV", 1.0);
    report.result("delta_K", num(fit.params.delta_kelvin()));
    report.result(
        "delta_cm-1",
        num(convert_energy(
            fit.params.delta,
            EnergyUnit::MilliElectronVolt,
            EnergyUnit::Wavenumber,
        )),
    );
    report.result("fit", fit_summary(&fit.outcome));

    let mut table = Table::new(&[
        "temperature_K",
        "T1_us",
        "sigma_us",
        "T1_fit_us",
        "residual",
    ]);
    for (p, r) in ds.points().iter().zip(&fit.outcome.residuals) {
        let model = 1.0
            / orbach_rate(
                &fit.params,
                relaxkit::mechanisms::ORBACH_T2_RATIO,
                p.temperature,
            )?
            .r1;
        table.push(vec![
            num(p.temperature),
            num(s_to_us(p.time)),
            num(s_to_us(p.sigma)),
            num(s_to_us(model)),
            num(*r),
        ]);
    }
    report.result("points", table.to_value());
    Ok((report, table, fit.outcome.converged))
}

pub fn fit_diffusion_cmd(
    doc: &ConfigDocument,
    config_name: &str,
    overrides: &[String],
) -> CliResult<(Report, Table, bool)> {
    let def = doc.diffusion_fit.as_ref().ok_or_else(|| {
        CliError::input(format!(
            "{config_name}: config field `diffusion_fit`: missing"
        ))
    })?;
    if def.datasets.is_empty() {
        return Err(CliError::input(format!("{config_name}: config field `diffusion_fit.datasets`: at least one dataset is required")));
    }
    let mut files: Vec<Option<std::path::PathBuf>> = def
        .datasets
        .iter()
        .map(|d| d.file.as_ref().map(|f| doc.resolve(f)))
        .collect();
    for o in overrides {
        let (label, path) = o
            .split_once('=')
            .ok_or_else(|| CliError::input(format!("--data expects LABEL=PATH, got '{o}'")))?;
        let idx = def
            .datasets
            .iter()
            .position(|d| d.label == label)
            .ok_or_else(|| {
                CliError::input(format!(
                    "--data: no dataset labelled '{label}' in the config"
                ))
            })?;
        files[idx] = Some(path.into());
    }

    let mut report = Report::new("fit-diffusion");
    report.input("config", config_name);
    report.input("field_B0_T", num(doc.field_b0));
    report.input("mode", format!("{:?}", def.mode).to_lowercase());
    let mut datasets = Vec::new();
    let mut inputs = Vec::new();
    for (i, (d, file)) in def.datasets.iter().zip(&files).enumerate() {
        let path = format!("diffusion_fit.datasets[{i}]");
        let file = file.as_ref().ok_or_else(|| {
            CliError::input(format!(
                "{config_name}: config field `{path}.file`: missing and no --data {}=PATH given",
                d.label
            ))
        })?;
        let (data, warnings) = load_relaxation_csv(file, TimeQuantity::T2, &d.label)?;
        report.warnings.extend(warnings);
        let species = doc.species(&d.species, &format!("{path}.species"))?;
        inputs.push(json!({"label": d.label, "file": path_text(file), "species": species.label, "points": data.len()}));
        datasets.push(DiffusionDataset {
            concentration: doc.concentration(
                &d.concentration,
                &species,
                &format!("{path}.concentration"),
            )?,
            solvent_diffusion: doc
                .diffusion(&d.solvent_diffusion, &format!("{path}.solvent_diffusion"))?,
            species,
            data,
        });
    }
    report.input("datasets", Value::Array(inputs));

    let (orbach, t2_ratio) = doc.fit_orbach_params(def)?;
    report.input("orbach", json!({"A_per_s": num(orbach.prefactor), "delta_meV": num(orbach.delta), "t2_ratio": num(t2_ratio)}));
    let mut spec = DiffusionFitSpec::new(
        datasets.clone(),
        def.d_nm.to_spec("d", nm_to_m(1.0)),
        doc.fit_mode(def)?,
        orbach,
    );
    spec.orbach_t2_ratio = t2_ratio;
    spec.b0 = doc.field_b0;
    spec.weighted = doc.fit.weighted;
    spec.options = doc.fit.lm_options();
    report.input("weighted", spec.weighted);

    let out = fit_diffusion(&spec)?;
    put_param(&mut report, "d_nm", &out.fit, "d", m_to_nm(1.0));
    if out.fit.parameter("D0").is_some() {
        put_param(
            &mut report,
            "D0_cm2_per_s",
            &out.fit,
            "D0",
            si_to_cm2_per_s(1.0),
        );
        put_param(&mut report, "Ea_K", &out.fit, "Ea", 1.0);
        put_param(&mut report, "T0_K", &out.fit, "T0", 1.0);
    }
    report.result("fit", fit_summary(&out.fit));

    if let Some(pw) = &out.pointwise {
        let mut t = Table::new(&[
            "label",
            "temperature_K",
            "D_total_cm2_per_s",
            "D_solute_cm2_per_s",
            "out_of_range",
        ]);
        for r in &pw.rows {
            t.push(vec![
                Value::String(r.label.clone()),
                num(r.temperature),
                num(si_to_cm2_per_s(r.total_diffusion)),
                num(si_to_cm2_per_s(r.solute_diffusion)),
                Value::Bool(r.out_of_range),
            ]);
        }
        report.result("pointwise_inconsistency", num(pw.inconsistency));
        report.result("pointwise_diffusion", t.to_value());
    }
    if !out.excluded.is_empty() {
        let mut t = Table::new(&[
            "label",
            "temperature_K",
            "T2_us",
            "excess_rate_per_s",
            "reason",
        ]);
        for e in &out.excluded {
            t.push(vec![
                Value::String(e.label.clone()),
                num(e.temperature),
                num(s_to_us(e.time)),
                num(e.excess_rate),
                Value::String(e.reason.clone()),
            ]);
        }
        report.warnings.push(format!(
            "{} point(s) excluded from the fit",
            out.excluded.len()
        ));
        report.result("excluded", t.to_value());
    }

    let mut table = Table::new(&[
        "label",
        "temperature_K",
        "T2_us",
        "sigma_us",
        "T2_fit_us",
        "D_solute_cm2_per_s",
    ]);
    for ds in &datasets {
        let channels = out.solute.as_ref().map(|solute| {
            vec![
                RelaxationChannel::Orbach {
                    params: orbach,
                    t2_ratio,
                },
                RelaxationChannel::TranslationalDiffusion(
                    DiffusionMechanism::new(
                        out.d,
                        ds.species.clone(),
                        ds.concentration.clone(),
                        ds.solvent_diffusion.clone(),
                        solute.clone(),
                    )
                    .with_field(doc.field_b0),
                ),
            ]
        });
        for p in ds.data.points() {
            let (fit_t2, solute_d) = match (&channels, &out.solute) {
                (Some(ch), Some(solute)) => (
                    num(s_to_us(1.0 / compose_channels(ch, p.temperature)?.value.r2)),
                    num(si_to_cm2_per_s(solute.evaluate(p.temperature)?.value)),
                ),
                _ => (Value::Null, Value::Null),
            };
            table.push(vec![
                Value::String(ds.data.label.clone()),
                num(p.temperature),
                num(s_to_us(p.time)),
                num(s_to_us(p.sigma)),
                fit_t2,
                solute_d,
            ]);
        }
    }
    report.result("curves", table.to_value());
    Ok((report, table, out.fit.converged))
}

fn echo_kind(model: EchoModelArg, n: Option<f64>) -> EchoModelKind {
    match model {
        EchoModelArg::Mono => EchoModelKind::Mono,
        EchoModelArg::Stretched => EchoModelKind::Stretched { n },
        EchoModelArg::ModulatedBi => EchoModelKind::ModulatedBi,
    }
}

pub fn fit_echo_cmd(
    data: &Path,
    model: EchoModelArg,
    n: Option<f64>,
    compare: Option<f64>,
) -> CliResult<(Report, Table, bool)> {
    if n.is_some() && model != EchoModelArg::Stretched {
        return Err(CliError::input("--n applies only to --model stretched"));
    }
    let (trace, warnings) = load_echo_csv(data)?;
    let kind = echo_kind(model, n);
    let fit = fit_echo(&trace, kind)?;
    let mut report = Report::new("fit-echo");
    report.warnings = warnings;
    report.input("data", path_text(data));
    report.input("points", trace.len());
    report.input("model", serde_json::to_value(kind).expect("serializes"));
    let us = s_to_us(1.0);
    match kind {
        EchoModelKind::Mono => {
            put_param(&mut report, "A", &fit, "A", 1.0);
            put_param(&mut report, "T2_us", &fit, "T2", us);
        }
        EchoModelKind::Stretched { .. } => {
            put_param(&mut report, "A", &fit, "A", 1.0);
            put_param(&mut report, "T2_us", &fit, "T2", us);
            put_param(&mut report, "n", &fit, "n", 1.0);
        }
        EchoModelKind::ModulatedBi => {
            put_param(&mut report, "A_inner", &fit, "A_inner", 1.0);
            put_param(&mut report, "T2_inner_us", &fit, "T2_inner", us);
            put_param(&mut report, "A_outer", &fit, "A_outer", 1.0);
            put_param(&mut report, "T2_outer_us", &fit, "T2_outer", us);
            put_param(
                &mut report,
                "omega_mod_rad_per_us",
                &fit,
                "omega_mod",
                1.0 / us,
            );
            put_param(&mut report, "phase_rad", &fit, "phase", 1.0);
        }
    }
    report.result("fit", fit_summary(&fit));
    if let Some(cn) = compare {
        let c = compare_mono_stretched(&trace, cn)?;
        report.result(
            "comparison",
            json!({
                "n": num(cn),
                "reduced_chi2_mono": num(c.mono.reduced_chi2),
                "reduced_chi2_stretched": num(c.stretched.reduced_chi2),
                "reduced_chi2_gap": num(c.reduced_chi2_gap),
                "threshold": num(c.threshold),
                "distinguishable": c.distinguishable,
            }),
        );
    }

    let fitted: EchoDecayModel = kind.model_from(&fit);
    let mut table = Table::new(&["tau_us", "amplitude", "sigma", "fit", "residual"]);
    for (p, r) in trace.points().iter().zip(&fit.residuals) {
        table.push(vec![
            num(s_to_us(p.tau)),
            num(p.amplitude),
            num(p.sigma),
            num(evaluate_decay(&fitted, p.tau)?),
            num(*r),
        ]);
    }
    report.result("points", table.to_value());
    Ok((report, table, fit.converged))
}

pub fn regime(doc: &ConfigDocument, config_name: &str, diffusion_cm2: f64) -> CliResult<Report> {
    let def = doc
        .regime
        .as_ref()
        .ok_or_else(|| CliError::input(format!("{config_name}: config field `regime`: missing")))?;
    if !(diffusion_cm2 >= 0.0) || !diffusion_cm2.is_finite() {
        return Err(CliError::input(format!(
            "--D must be >= 0 cm2/s, got {diffusion_cm2}"
        )));
    }
    let species = doc.species(&def.species, "regime.species")?;
    if !(def.d_nm > 0.0) {
        return Err(CliError::input(format!(
            "{config_name}: config field `regime.d_nm`: must be > 0, got {}",
            def.d_nm
        )));
    }
    let d = nm_to_m(def.d_nm);
    let temperature = def.temperature_k.unwrap_or(300.0);
    let conc = doc
        .concentration(&def.concentration, &species, "regime.concentration")?
        .evaluate(temperature)?;
    let d_min = crossover_diffusion(&species, d)?;
    let (c_d3, _) = concentration_criterion(conc.value, d);
    let r = classify_regime(cm2_per_s_to_si(diffusion_cm2), d_min, c_d3);

    let mut report = Report::new("regime");
    report.input("config", config_name);
    report.input("species", species.label.clone());
    report.input("d_nm", num(def.d_nm));
    report.input("concentration_temperature_K", num(temperature));
    report.input("D_cm2_per_s", num(diffusion_cm2));
    report.result("concentration_per_cm3", num(si_to_per_cm3(conc.value)));
    report.result("D_min_cm2_per_s", num(si_to_cm2_per_s(r.d_min)));
    report.result("D_over_D_min", num(r.diffusion / r.d_min));
    report.result("c_d3", num(r.c_d3));
    report.result("low_concentration", r.low_concentration);
    report.result("regime", r.regime.as_str());
    report.result(
        "exponent_range",
        json!([num(r.exponent_low), num(r.exponent_high)]),
    );
    if conc.out_of_range {
        report.warnings.push(format!(
            "concentration model evaluated outside its validity range at {} K",
            crate::report::fmt_num(temperature)
        ));
    }
    if !r.low_concentration {
        report
            .warnings
            .push("c·d³ is not small; the dilute-bath approximation is questionable".into());
    }
    Ok(report)
}

fn seed_for(noise: &NoiseArgs) -> CliResult<u64> {
    if !(noise.noise >= 0.0) || !noise.noise.is_finite() {
        return Err(CliError::input(format!(
            "--noise must be >= 0, got {}",
            noise.noise
        )));
    }
    match noise.seed {
        Some(s) => Ok(s),
        None if noise.noise > 0.0 => Err(CliError::input("--seed is required when --noise > 0")),
        None => Ok(0),
    }
}

fn synth_sink(noise: &NoiseArgs, stdout: &mut dyn Write, body: Vec<u8>) -> CliResult<()> {
    match &noise.out {
        Some(p) => std::fs::write(p, body)
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", p.display()))),
        None => {
            stdout.write_all(&body)?;
            Ok(())
        }
    }
}

fn synth_cmd(kind: SynthCommand, stdout: &mut dyn Write) -> CliResult<()> {
    match kind {
        SynthCommand::T1 {
            prefactor,
            delta_mev,
            temps,
            noise,
        } => {
            let seed = seed_for(&noise)?;
            let params = OrbachParams::new(prefactor, delta_mev)?;
            let ds = synth::orbach_t1_dataset(&params, &temps.values(), noise.noise, seed)?;
            let mut buf = Vec::new();
            let comment = format!(
                "synthetic Orbach T1: A_per_s={} delta_meV={} noise={} seed={}",
                crate::report::fmt_num(prefactor),
                crate::report::fmt_num(delta_mev),
                crate::report::fmt_num(noise.noise),
                seed
            );
            write_relaxation_csv(&mut buf, &ds, &comment)?;
            synth_sink(&noise, stdout, buf)
        }
        SynthCommand::T2 {
            config,
            temps,
            label,
            noise,
        } => {
            let seed = seed_for(&noise)?;
            let doc = load_config(&config)?;
            let channels: Vec<RelaxationChannel> =
                doc.channels()?.into_iter().map(|(_, c)| c).collect();
            let ds = synth::t2_dataset(&channels, &temps.values(), noise.noise, seed, &label)?;
            let mut buf = Vec::new();
            let comment = format!(
                "synthetic T2 from {}: noise={} seed={}",
                path_text(&config),
                crate::report::fmt_num(noise.noise),
                seed
            );
            write_relaxation_csv(&mut buf, &ds, &comment)?;
            synth_sink(&noise, stdout, buf)
        }
        SynthCommand::Echo {
            model,
            t2_us,
            n,
            amplitude,
            taus,
            noise,
        } => {
            let seed = seed_for(&noise)?;
            let t2 = us_to_s(t2_us);
            let decay = match model {
                EchoModelArg::Mono => EchoDecayModel::Mono { a: amplitude, t2 },
                EchoModelArg::Stretched => EchoDecayModel::Stretched {
                    a: amplitude,
                    t2,
                    n,
                },
                EchoModelArg::ModulatedBi => {
                    return Err(CliError::input(
                        "synth echo supports mono and stretched models",
                    ))
                }
            };
            let tau_s: Vec<f64> = taus.0.values().into_iter().map(us_to_s).collect();
            let trace = synth::echo_trace(&decay, &tau_s, noise.noise, seed)?;
            let mut buf = Vec::new();
            let comment = format!(
                "synthetic echo: T2_us={} n={} noise={} seed={}",
                crate::report::fmt_num(t2_us),
                crate::report::fmt_num(n),
                crate::report::fmt_num(noise.noise),
                seed
            );
            write_echo_csv(&mut buf, &trace, &comment)?;
            synth_sink(&noise, stdout, buf)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn orbach_only_ratio() {
        let doc = parse_config(
            r#"{"channels": [{"type": "orbach", "A_per_s": 5e5, "delta_meV": 60}]}"#,
            "c",
        )
        .unwrap();
        let (_, table) = predict(&doc, "c", &[170.0, 235.0, 300.0]).unwrap();
        for row in &table.rows {
            let t1 = row[1].as_f64().unwrap();
            let t2 = row[2].as_f64().unwrap();
            assert!((t2 / t1 - 2.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_temperature_gives_one_row() {
        let doc = parse_config(
            r#"{"channels": [{"type": "orbach", "A_per_s": 5e5, "delta_meV": 60}]}"#,
            "c",
        )
        .unwrap();
        let (report, table) = predict(&doc, "c", &[250.0]).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert!(report.results["T2_interior_maximum_K"].is_null());
    }

    #[test]
    fn extrema_detection() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(
            interior_extrema(&x, &[1.0, 3.0, 5.0, 3.0, 1.0]),
            (Some(3.0), None)
        );
        assert_eq!(
            interior_extrema(&x, &[5.0, 3.0, 1.0, 3.0, 5.0]),
            (None, Some(3.0))
        );
        assert_eq!(
            interior_extrema(&x, &[1.0, 2.0, 3.0, 4.0, 5.0]),
            (None, None)
        );
    }

    #[test]
    fn regime_classes() {
        let doc = parse_config(
            r#"{"regime": {"species": "35Cl", "d_nm": 0.35, "concentration": {"model": "constant", "per_cm3": 1e22}}}"#,
            "c",
        )
        .unwrap();
        let class = |d: f64| {
            regime(&doc, "c", d).unwrap().results["regime"]
                .as_str()
                .unwrap()
                .to_string()
        };
        assert_eq!(class(5e-16), "slow_diffusion");
        assert_eq!(class(1e-8), "fast_diffusion");
        assert_eq!(class(0.0), "rigid");
        assert!(regime(&doc, "c", -1.0).is_err());
    }
}
