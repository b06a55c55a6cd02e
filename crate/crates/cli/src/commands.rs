//! The four subcommands. Each stages all artifacts before writing any.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sosunmix::amuse::{amuse, AmuseConfig, UnmixingModel};
use sosunmix::evaluation::{evaluate, MetricsReport};
use sosunmix::io::{
    read_cube, read_matrix, read_model, read_spectra, source_names, write_cube, write_model,
    write_spectra, write_table,
};
use sosunmix::sign_correction::{correct_signs, SignVerdict};
use sosunmix::spectra_model::{stack_spectra, WavelengthGrid};
use sosunmix::Matrix;

use crate::artifacts::Artifacts;
use crate::scenario::{self, Scenario, Simulation};

/// `--out` (or its environment variable), then the scenario's
/// `output_dir`, then `fallback`.
fn output_dir(
    flag: Option<PathBuf>,
    configured: Option<PathBuf>,
    fallback: impl Into<PathBuf>,
) -> PathBuf {
    flag.or(configured).unwrap_or_else(|| fallback.into())
}

fn report_written(paths: &[PathBuf], dir: &Path) {
    eprintln!("wrote {} files to {}", paths.len(), dir.display());
}

fn stage_truth(
    art: &mut Artifacts,
    scenario: &Scenario,
    sim: &Simulation,
    names: [&str; 3],
) -> Result<()> {
    let (grid, truth) = stack_spectra(&sim.sources)?;
    let components = scenario.component_names();
    art.add(names[0], |w| write_cube(w, &sim.cube))?;
    art.add(names[1], |w| write_spectra(w, &grid, &components, &truth))?;
    art.add(names[2], |w| {
        write_table(w, Some(&components), scenario.mixing.entries())
    })?;
    Ok(())
}

pub fn simulate(spec: &str, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let scenario = scenario::load(spec)?.with_seed(seed);
    let sim = scenario.simulate()?;
    let dir = output_dir(
        out,
        scenario.output_dir.clone(),
        Path::new("out").join(&scenario.name),
    );
    let mut art = Artifacts::new(dir);
    stage_truth(
        &mut art,
        &scenario,
        &sim,
        ["cube.csv", "true_sources.csv", "true_mixing.csv"],
    )?;
    let dir = art.dir().to_owned();
    report_written(&art.commit()?, &dir);
    Ok(())
}

pub struct UnmixOptions {
    pub config: AmuseConfig,
    pub bins: usize,
    pub sign_correction: bool,
}

fn log_model(model: &UnmixingModel) {
    for w in &model.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(verdicts) = &model.sign_correction {
        for (i, v) in verdicts.iter().enumerate() {
            eprintln!(
                "source {i}: {:?} by {:?} (baseline {:.6}, p_max {:.6}, p_min {:.6})",
                v.decision, v.rule, v.baseline, v.p_max, v.p_min
            );
        }
    }
}

fn unmix_cube(
    cube: &sosunmix::spectra_model::HyperspectralCube,
    opts: &UnmixOptions,
) -> Result<UnmixingModel> {
    if opts.config.delay >= cube.samples() {
        bail!(
            "invalid argument: --tau {} must be smaller than the {} samples",
            opts.config.delay,
            cube.samples()
        );
    }
    let raw = amuse(cube, &opts.config).context("unmixing failed")?;
    let model = if opts.sign_correction {
        correct_signs(&raw, opts.bins)?
    } else {
        raw
    };
    log_model(&model);
    Ok(model)
}

fn stage_model(art: &mut Artifacts, model: &UnmixingModel, names: [&str; 3]) -> Result<()> {
    art.add(names[0], |w| write_model(w, model))?;
    art.add(names[1], |w| {
        write_spectra(
            w,
            &model.grid,
            &source_names(model.n_sources),
            &model.sources,
        )
    })?;
    art.add(names[2], |w| {
        write_table(
            w,
            Some(&source_names(model.n_sources)),
            &model.mixing_estimate,
        )
    })?;
    Ok(())
}

pub fn unmix(cube_path: &Path, opts: &UnmixOptions, out: Option<PathBuf>) -> Result<()> {
    let file = fs::File::open(cube_path)
        .with_context(|| format!("cannot open cube {}", cube_path.display()))?;
    let cube =
        read_cube(file).with_context(|| format!("cannot read cube {}", cube_path.display()))?;
    let model = unmix_cube(&cube, opts)?;
    eprintln!(
        "recovered {} sources from {} pixels",
        model.n_sources,
        model.pixels()
    );
    let mut art = Artifacts::new(output_dir(out, None, "out"));
    stage_model(
        &mut art,
        &model,
        ["model.json", "sources.csv", "mixing.csv"],
    )?;
    let dir = art.dir().to_owned();
    report_written(&art.commit()?, &dir);
    Ok(())
}

/// Matched estimated mixing columns, each least-squares scaled onto its true
/// column, next to the true columns. Rows are pixels.
fn profile_table(
    truth: &Matrix,
    names: &[String],
    model: &UnmixingModel,
    report: &MetricsReport,
) -> (Vec<String>, Matrix) {
    let n = truth.ncols();
    let mut table = Matrix::zeros(truth.nrows(), 2 * n);
    for (i, &j) in report.matching.permutation.iter().enumerate() {
        let t = truth.column(j);
        let e = model.mixing_estimate.column(i);
        let ee = e.dot(&e);
        let factor = if ee > 0.0 { e.dot(&t) / ee } else { 0.0 };
        table.set_column(2 * j, &t);
        table.set_column(2 * j + 1, &(e * factor));
    }
    let header = names
        .iter()
        .flat_map(|name| [format!("true_{name}"), format!("estimated_{name}")])
        .collect();
    (header, table)
}

/// True spectra interleaved with their matched, sign- and scale-aligned estimates.
fn aligned_sources(
    grid: &WavelengthGrid,
    truth: &Matrix,
    names: &[String],
    model: &UnmixingModel,
    report: &MetricsReport,
) -> (Vec<String>, Matrix) {
    let aligned = report.matching.align(&model.sources);
    let n = truth.nrows();
    let mut data = Matrix::zeros(2 * n, grid.count());
    for j in 0..n {
        data.set_row(2 * j, &truth.row(j));
        // the alignment only fixes scale; restore the true row's mean for overlay
        let shift = truth.row(j).mean() - aligned.row(j).mean();
        data.set_row(2 * j + 1, &aligned.row(j).add_scalar(shift));
    }
    let header = names
        .iter()
        .flat_map(|name| [format!("true_{name}"), format!("estimated_{name}")])
        .collect();
    (header, data)
}

pub struct EvaluateInputs<'a> {
    pub model: &'a Path,
    pub truth_sources: &'a Path,
    pub truth_mixing: &'a Path,
    pub mixing_header: bool,
}

pub fn evaluate_cmd(inputs: &EvaluateInputs<'_>, out: Option<PathBuf>) -> Result<()> {
    let open = |p: &Path| fs::File::open(p).with_context(|| format!("cannot open {}", p.display()));
    let model = read_model(open(inputs.model)?)
        .with_context(|| format!("cannot read model {}", inputs.model.display()))?;
    let truth = read_spectra(open(inputs.truth_sources)?).with_context(|| {
        format!(
            "cannot read true sources {}",
            inputs.truth_sources.display()
        )
    })?;
    let mixing =
        read_matrix(open(inputs.truth_mixing)?, inputs.mixing_header).with_context(|| {
            format!(
                "cannot read true mixing matrix {}",
                inputs.truth_mixing.display()
            )
        })?;
    if truth.grid.count() != model.grid.count() {
        bail!(
            "shape mismatch: model has {} samples but the true sources have {}",
            model.grid.count(),
            truth.grid.count()
        );
    }
    let report = evaluate(&truth.data, &mixing, &model).context("shape mismatch")?;
    let mut art = Artifacts::new(output_dir(out, None, "out"));
    art.add_json("metrics.json", &report)?;
    let (header, table) = profile_table(&mixing, &truth.names, &model, &report);
    art.add("profiles.csv", |w| write_table(w, Some(&header), &table))?;
    let (header, data) = aligned_sources(&truth.grid, &truth.data, &truth.names, &model, &report);
    art.add("aligned_sources.csv", |w| {
        write_spectra(w, &truth.grid, &header, &data)
    })?;
    eprintln!(
        "min |r| {:.6}, sign accuracy {}, Amari index {:.3e}",
        report.min_abs_correlation, report.sign_accuracy, report.amari_index
    );
    let dir = art.dir().to_owned();
    report_written(&art.commit()?, &dir);
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct StageSummary {
    pub correlations: Vec<f64>,
    pub min_abs_correlation: f64,
    pub sign_accuracy: f64,
    pub amari_index: f64,
    pub mixing_column_cosines: Vec<f64>,
}

impl From<&MetricsReport> for StageSummary {
    fn from(r: &MetricsReport) -> Self {
        Self {
            correlations: r.correlations.clone(),
            min_abs_correlation: r.min_abs_correlation,
            sign_accuracy: r.sign_accuracy,
            amari_index: r.amari_index,
            mixing_column_cosines: r.mixing_column_cosines.clone(),
        }
    }
}

/// Contents of `summary.json`; per-component vectors follow `components`.
#[derive(Debug, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub components: Vec<String>,
    pub pixels: usize,
    pub samples: usize,
    pub n_sources: usize,
    pub delay: usize,
    pub mode: String,
    pub bins: usize,
    pub raw: StageSummary,
    pub corrected: StageSummary,
    pub verdicts: Vec<SignVerdict>,
    pub warnings: Vec<String>,
}

fn baselines_csv(verdicts: &[SignVerdict]) -> Vec<u8> {
    let mut out = String::from("source,baseline,p_max,p_min,rule,decision\n");
    for (i, v) in verdicts.iter().enumerate() {
        let rule = serde_json::to_value(v.rule)
            .map(|r| r.as_str().unwrap_or_default().to_owned())
            .unwrap_or_default();
        let decision = serde_json::to_value(v.decision)
            .map(|d| d.as_str().unwrap_or_default().to_owned())
            .unwrap_or_default();
        out.push_str(&format!(
            "source_{i},{:?},{:?},{:?},{rule},{decision}\n",
            v.baseline, v.p_max, v.p_min
        ));
    }
    out.into_bytes()
}

fn summary_table(s: &Summary) -> String {
    let mut out = format!(
        "{}: {} pixels x {} samples, {} sources (tau {}, {})\n",
        s.scenario, s.pixels, s.samples, s.n_sources, s.delay, s.mode
    );
    out.push_str(&format!(
        "{:<12} {:>12} {:>12} {:>12}\n",
        "component", "raw r", "corrected r", "profile cos"
    ));
    for (j, name) in s.components.iter().enumerate() {
        out.push_str(&format!(
            "{:<12} {:>12.6} {:>12.6} {:>12.6}\n",
            name,
            s.raw.correlations[j],
            s.corrected.correlations[j],
            s.corrected.mixing_column_cosines[j]
        ));
    }
    out.push_str(&format!(
        "sign accuracy {:.2} raw, {:.2} corrected; Amari index {:.3e}\n",
        s.raw.sign_accuracy, s.corrected.sign_accuracy, s.corrected.amari_index
    ));
    out
}

/// Prints to stdout; a reader that closed the pipe early is not an error.
fn print_stdout(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            Err(e).context("cannot write to stdout")
        }
        _ => Ok(()),
    }
}

pub fn demo(spec: &str, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let scenario = scenario::load(spec)?.with_seed(seed);
    let sim = scenario.simulate()?;
    let (_, truth) = stack_spectra(&sim.sources)?;
    let names = scenario.component_names();
    let opts = UnmixOptions {
        config: scenario.amuse,
        bins: scenario.bins,
        sign_correction: false,
    };
    let raw = unmix_cube(&sim.cube, &opts)?;
    let corrected = correct_signs(&raw, scenario.bins)?;
    log_model(&UnmixingModel {
        warnings: Vec::new(),
        ..corrected.clone()
    });
    let truth_mixing = scenario.mixing.entries();
    let raw_report = evaluate(&truth, truth_mixing, &raw).context(
        "the recovered source count differs from the scenario's component count; set `n` in the scenario",
    )?;
    let report = evaluate(&truth, truth_mixing, &corrected)?;
    let verdicts = corrected.sign_correction.clone().unwrap_or_default();

    let summary = Summary {
        scenario: scenario.name.clone(),
        components: names.clone(),
        pixels: sim.cube.pixels(),
        samples: sim.cube.samples(),
        n_sources: corrected.n_sources,
        delay: corrected.delay,
        mode: corrected.mode.as_str().to_owned(),
        bins: scenario.bins,
        raw: (&raw_report).into(),
        corrected: (&report).into(),
        verdicts: verdicts.clone(),
        warnings: corrected.warnings.iter().map(|w| w.to_string()).collect(),
    };

    let dir = output_dir(
        out,
        scenario.output_dir.clone(),
        Path::new("out").join(&scenario.name),
    );
    let mut art = Artifacts::new(dir);
    stage_truth(
        &mut art,
        &scenario,
        &sim,
        ["mixture_cube.csv", "pure_spectra.csv", "true_profiles.csv"],
    )?;
    stage_model(
        &mut art,
        &raw,
        ["model_raw.json", "raw_sources.csv", "raw_profiles.csv"],
    )?;
    stage_model(
        &mut art,
        &corrected,
        [
            "model.json",
            "corrected_sources.csv",
            "corrected_profiles.csv",
        ],
    )?;
    let baselines = baselines_csv(&verdicts);
    art.add("baselines.csv", |w| {
        w.extend_from_slice(&baselines);
        Ok(())
    })?;
    art.add_json("metrics_raw.json", &raw_report)?;
    art.add_json("metrics.json", &report)?;
    art.add_json("summary.json", &summary)?;
    let dir = art.dir().to_owned();
    let written = art.commit()?;
    print_stdout(&summary_table(&summary))?;
    report_written(&written, &dir);
    Ok(())
}
