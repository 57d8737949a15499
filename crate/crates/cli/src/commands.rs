use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;
use softfail::dataset::{class_counts, load_dataset, read_trace, write_annotations, write_trace};
use softfail::eval::{evaluate, grid_search, GridOutcome, GridSearchOptions, GRID_TSV_HEADER};
use softfail::noise::{estimate_noise, read_trajectory};
use softfail::preprocess::frame_signal;
use softfail::svm::{read_model, train_multiclass, write_model, MultiClassSvm, SvmParams};
use softfail::synth::{generate, ScenarioSpec};
use softfail::{ColumnSpec, DatasetRole, EvaluationReport, FailureLabel, FeatureExtractor, PreprocessConfig};

use crate::config::FileConfig;
use crate::{Cli, CliError, Command, Format, Preset};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Estimate {
            input,
            actual,
            desired,
            output,
        } => {
            require_file(input)?;
            require_parent(output)?;
            let spec = ColumnSpec::parse(actual, desired);
            let traj = read_trajectory(input, &spec)?;
            let trace = estimate_noise(&traj);
            write_file(output, |out| write_trace(&trace, out))?;
            log::info!(
                "{} samples at {} Hz from {} actual and {} desired columns",
                trace.len(),
                trace.sample_rate(),
                traj.actual_columns(),
                traj.desired_columns()
            );
            Ok(())
        }
        Command::Train {
            noise,
            annotations,
            model,
            preprocess,
            svm,
        } => {
            require_file(noise)?;
            require_file(annotations)?;
            require_parent(model)?;
            let cfg = preprocess.apply(file.preprocess.clone())?;
            let params = svm.resolve(&file.svm)?;
            let ds = load_dataset(noise, annotations, DatasetRole::Training)?;
            let trained = train(&ds, &cfg, &params, &file)?;
            write_file(model, |out| write_model(&trained, out))?;
            let features = FeatureExtractor::new(cfg)?.featurize(&ds);
            let counts = class_counts(features.iter().map(|f| f.label));
            print!("{}", training_summary(&trained, &counts, cli.format));
            Ok(())
        }
        Command::Validate {
            model,
            noise,
            annotations,
            output,
        } => {
            require_file(model)?;
            require_file(noise)?;
            require_file(annotations)?;
            if let Some(o) = output {
                require_parent(o)?;
            }
            let model = read_model(model)?;
            let ds = load_dataset(noise, annotations, DatasetRole::Validation)?;
            let report = evaluate(&model, &ds)?;
            emit_report(&report, cli.format, output.as_deref())
        }
        Command::Tune {
            train_noise,
            train_annotations,
            val_noise,
            val_annotations,
            grid,
            preprocess,
            journal,
            output,
            model,
        } => {
            for p in [train_noise, train_annotations, val_noise, val_annotations] {
                require_file(p)?;
            }
            for p in [journal, output, model].into_iter().flatten() {
                require_parent(p)?;
            }
            let hyper = grid.resolve(&file.grid)?;
            let options = GridSearchOptions {
                preprocess: preprocess.apply(file.preprocess.clone())?,
                class_weight_factor: grid
                    .class_weight_factor
                    .or(file.svm.class_weight_factor)
                    .unwrap_or(softfail::svm::DEFAULT_CLASS_WEIGHT_FACTOR),
                solver: file.solver(),
            };
            let train_ds = load_dataset(train_noise, train_annotations, DatasetRole::Training)?;
            let val_ds = load_dataset(val_noise, val_annotations, DatasetRole::Validation)?;

            let completed = match journal {
                Some(j) if j.exists() => read_journal(j)?,
                _ => BTreeMap::new(),
            };
            if !completed.is_empty() {
                log::info!("resuming: {} grid points already evaluated", completed.len());
            }
            let sink = match journal {
                Some(j) => Some(Mutex::new(open_journal(j)?)),
                None => None,
            };
            let write_failure: Mutex<Option<String>> = Mutex::new(None);
            let on_done = |o: &GridOutcome| {
                log::info!(
                    "point {}: subset accuracy {:.4}, failure detection {:.4}",
                    o.point.index,
                    o.report.subset_accuracy(),
                    o.report.failure_detection_rate()
                );
                if let Some(sink) = &sink {
                    let mut f = sink.lock().unwrap();
                    if let Err(e) = writeln!(f, "{}", o.to_tsv_row()).and_then(|_| f.flush()) {
                        write_failure.lock().unwrap().get_or_insert(e.to_string());
                    }
                }
            };
            let result = grid_search(&train_ds, &val_ds, &hyper, &options, &completed, &on_done)?;
            if let Some(e) = write_failure.into_inner().unwrap() {
                return Err(CliError::internal(format!("writing the journal failed: {e}")));
            }
            if let Some(o) = output {
                write_file(o, |out| out.write_all(result.render_tsv().as_bytes()))?;
            }
            let best = result.best();
            match cli.format {
                Format::Table => {
                    println!(
                        "Selected point {} of {}: fft_stride {}, C_hat {}, gamma {}",
                        best.point.index,
                        result.outcomes.len(),
                        best.point.fft_stride,
                        best.point.c_hat,
                        best.point.gamma.map_or("-".into(), |g| g.to_string())
                    );
                    if !best.converged {
                        println!("warning: the selected point hit the iteration cap");
                    }
                    print!("\n{}", best.report.render_table());
                }
                Format::Tsv => print!("{GRID_TSV_HEADER}\n{}\n", best.to_tsv_row()),
            }
            if let Some(m) = model {
                let cfg = PreprocessConfig {
                    fft_stride: best.point.fft_stride,
                    ..options.preprocess.clone()
                };
                let params = SvmParams {
                    kernel: best.point.kernel(),
                    c_hat: best.point.c_hat,
                    class_weight_factor: options.class_weight_factor,
                };
                let trained = train(&train_ds, &cfg, &params, &file)?;
                write_file(m, |out| write_model(&trained, out))?;
            }
            Ok(())
        }
        Command::Predict { model, noise, output } => {
            require_file(model)?;
            require_file(noise)?;
            if let Some(o) = output {
                require_parent(o)?;
            }
            let model = read_model(model)?;
            let trace = read_trace(noise)?;
            let cfg = model.preprocess.clone();
            let extractor = FeatureExtractor::new(cfg.clone())?;
            let frames = frame_signal(trace.samples(), &cfg);
            let features = extractor.featurize_frames(&frames);
            let labels = features
                .par_iter()
                .map(|f| model.predict(&f.values))
                .collect::<Result<Vec<FailureLabel>, _>>()?;
            let rate = trace.sample_rate();
            let mut text = String::from("frame\tt_start\tt_end\tlabel\n");
            for (i, (f, label)) in features.iter().zip(&labels).enumerate() {
                let start = f.origin.offset as f64 / rate;
                let end = ((f.origin.offset + cfg.frame_size) as f64 / rate).min(trace.duration());
                text.push_str(&format!("{i}\t{start}\t{end}\t{label}\n"));
            }
            match output {
                Some(o) => write_file(o, |out| out.write_all(text.as_bytes())),
                None => stdout_write(&text),
            }
        }
        Command::Synth {
            scenario,
            preset,
            duration,
            noise,
            annotations,
            spec_out,
        } => {
            for p in [Some(noise), Some(annotations), spec_out.as_ref()].into_iter().flatten() {
                require_parent(p)?;
            }
            let spec = match (scenario, preset) {
                (Some(path), _) => {
                    require_file(path)?;
                    let mut spec = ScenarioSpec::read(path)?;
                    if let Some(seed) = cli.seed {
                        spec.seed = seed;
                    }
                    spec
                }
                (None, Some(p)) => {
                    let seed = file.seed(cli.seed);
                    let (seed, default_len) = match p {
                        Preset::Training => (seed, 64.0),
                        Preset::Validation => (seed.wrapping_add(1), 34.0),
                    };
                    let len = duration.unwrap_or(default_len);
                    if !(len.is_finite() && len > 0.0) {
                        return Err(CliError::input(format!("--duration must be positive, got {len}")));
                    }
                    ScenarioSpec::reference_corpus(seed, len)
                }
                (None, None) => return Err(CliError::input("one of --scenario or --preset is required")),
            };
            let s = generate(&spec)?;
            write_file(noise, |out| write_trace(&s.trace, out))?;
            write_file(annotations, |out| write_annotations(&s.annotations, out))?;
            if let Some(p) = spec_out {
                write_file(p, |out| out.write_all(spec.to_toml().as_bytes()))?;
            }
            log::info!("{:.1} s, {} annotated blocks", s.trace.duration(), s.annotations.len());
            Ok(())
        }
        Command::Inspect {
            noise,
            frame,
            model,
            preprocess,
            out_dir,
        } => {
            require_file(noise)?;
            if !out_dir.is_dir() {
                return Err(CliError::input(format!("{}: not a directory", out_dir.display())));
            }
            let cfg = match model {
                Some(m) => {
                    require_file(m)?;
                    read_model(m)?.preprocess
                }
                None => preprocess.apply(file.preprocess.clone())?,
            };
            let trace = read_trace(noise)?;
            let frames = frame_signal(trace.samples(), &cfg);
            let Some(f) = frames.get(*frame) else {
                return Err(CliError::input(format!(
                    "frame {frame} out of range; the trace has {} frames",
                    frames.len()
                )));
            };
            let extractor = FeatureExtractor::new(cfg)?;
            let spec = extractor.spectrogram(&f.samples)?;
            let compressed = extractor.compress(&spec);
            let dct = extractor.dct_rows(&compressed);
            write_file(&out_dir.join("frame.tsv"), |out| {
                for v in &f.samples {
                    writeln!(out, "{v}")?;
                }
                Ok(())
            })?;
            write_file(&out_dir.join("spectrogram.tsv"), |out| spec.write_tsv(out))?;
            write_file(&out_dir.join("compressed.tsv"), |out| compressed.write_tsv(out))?;
            write_file(&out_dir.join("dct.tsv"), |out| dct.write_tsv(out))?;
            Ok(())
        }
    }
}

fn train(
    ds: &softfail::Dataset,
    cfg: &PreprocessConfig,
    params: &SvmParams,
    file: &FileConfig,
) -> Result<MultiClassSvm, CliError> {
    let features = FeatureExtractor::new(cfg.clone())?.featurize(ds);
    let model = train_multiclass(&features, cfg, params, &file.solver())?;
    if !model.converged() {
        log::warn!("some class machines stopped at the iteration cap");
    }
    Ok(model)
}

fn training_summary(model: &MultiClassSvm, counts: &BTreeMap<FailureLabel, usize>, format: Format) -> String {
    let mut s = String::new();
    match format {
        Format::Table => {
            s.push_str(&format!(
                "Trained {} kernel, C_hat {}, feature length {}\n\n",
                model.kernel.name(),
                model.c_hat,
                model.feature_len()
            ));
            s.push_str(&format!(
                "{:<14}{:>8}{:>14}{:>10}{:>12}{:>11}\n",
                "class", "frames", "C", "SVs", "iterations", "converged"
            ));
            for (label, m) in &model.machines {
                s.push_str(&format!(
                    "{:<14}{:>8}{:>14.6}{:>10}{:>12}{:>11}\n",
                    label.to_string(),
                    counts[label],
                    m.c,
                    m.n_support(),
                    m.status.iterations,
                    m.status.converged
                ));
            }
        }
        Format::Tsv => {
            s.push_str("class\tframes\tc\tsupport_vectors\titerations\tconverged\n");
            for (label, m) in &model.machines {
                s.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\n",
                    label.key(),
                    counts[label],
                    m.c,
                    m.n_support(),
                    m.status.iterations,
                    m.status.converged
                ));
            }
        }
    }
    s
}

fn emit_report(report: &EvaluationReport, format: Format, output: Option<&Path>) -> Result<(), CliError> {
    let text = match format {
        Format::Table => report.render_table(),
        Format::Tsv => report.render_tsv(),
    };
    if let Some(o) = output {
        write_file(o, |out| out.write_all(text.as_bytes()))?;
    }
    stdout_write(&text)
}

fn read_journal(path: &Path) -> Result<BTreeMap<usize, GridOutcome>, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let lines: Vec<&str> = text.lines().collect();
    let mut done = BTreeMap::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() || line.starts_with("index\t") {
            continue;
        }
        match GridOutcome::from_tsv_row(line) {
            Ok(o) => {
                done.insert(o.point.index, o);
            }
            // an interrupted run can leave a partial final row
            Err(_) if i + 1 == lines.len() && !text.ends_with('\n') => {
                log::warn!("{}: ignoring incomplete last row", path.display());
            }
            Err(e) => return Err(CliError::input(format!("{}:{}: {e}", path.display(), i + 1))),
        }
    }
    Ok(done)
}

fn open_journal(path: &Path) -> Result<File, CliError> {
    let fail = |e: std::io::Error| CliError::internal(format!("{}: {e}", path.display()));
    let existing = if path.exists() { fs::read(path).map_err(fail)? } else { Vec::new() };
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(fail)?;
    // drop a partial final row so appended rows start on a fresh line
    let complete = existing.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
    if complete < existing.len() {
        f.set_len(complete as u64).map_err(fail)?;
    }
    if complete == 0 {
        writeln!(f, "{GRID_TSV_HEADER}").map_err(fail)?;
    }
    Ok(f)
}

fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::input(format!("{}: no such file", path.display())))
    }
}

fn require_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => {
            Err(CliError::input(format!("{}: directory does not exist", p.display())))
        }
        _ => Ok(()),
    }
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let fail = |e: std::io::Error| CliError::internal(format!("{}: {e}", path.display()));
    let mut out = BufWriter::new(File::create(path).map_err(fail)?);
    body(&mut out).map_err(fail)?;
    out.flush().map_err(fail)
}

fn stdout_write(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::internal(format!("stdout: {e}")))
}
