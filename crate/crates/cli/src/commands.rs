use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::Serialize;

use irlv::channel::FeatureVector;
use irlv::eval::{
    calibrate_threshold, estimate_rates, evaluate_model, run_experiment, scenario_id, score_all, simulate_grid, simulate_map, train_model,
    Experiment, ExperimentResult, RocCurve, RocMeta, TrainedModel,
};
use irlv::geometry::{Position, Rect, RegionLabel, Scenario};
use irlv::io::{grid_spacing, label_by_roi, read_dataset_csv, split_train_test, warn_duplicate_aps, write_dataset_csv};
use irlv::presets::{self, Plan};
use irlv::Error;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{read_text, sha256_hex, Outputs};

const CONFIG_DEFINED: &str = "config-defined";

fn load(path: &Path) -> Result<(RunConfig, Experiment), CliError> {
    let cfg = RunConfig::parse(&read_text(path)?)?;
    let exp = cfg.experiment()?;
    Ok((cfg, exp))
}

fn out_dir(out: Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf, CliError> {
    out.or_else(|| cfg.output.dir.clone()).ok_or_else(|| CliError::Config("no output directory (--out or output.dir)".into()))
}

fn read_rows(path: &Path) -> Result<Vec<FeatureVector>, CliError> {
    let f = File::open(path).map_err(|e| CliError::File(path.to_path_buf(), e))?;
    read_dataset_csv(f).map_err(|e| match e {
        Error::Data(m) => Error::Data(format!("{}: {m}", path.display())).into(),
        other => other.into(),
    })
}

fn check_dims(rows: &[FeatureVector], n: usize) -> Result<(), CliError> {
    match rows.iter().find(|r| r.len() != n) {
        Some(r) => Err(Error::DimensionMismatch { expected: n, found: r.len() }.into()),
        None => Ok(()),
    }
}

/// Link states are not stored in CSV files; rows with a position get them
/// back from the scenario geometry.
fn fill_links(rows: &mut [FeatureVector], scenario: &Scenario) -> Result<(), CliError> {
    for r in rows.iter_mut().filter(|r| r.links.is_none()) {
        if let Some(p) = r.position.filter(|p| scenario.in_area(p)) {
            r.links = Some((0..scenario.n_aps()).map(|n| scenario.los_state(&p, n)).collect::<Result<_, _>>()?);
        }
    }
    Ok(())
}

fn dataset_csv(rows: &[FeatureVector]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_dataset_csv(&mut buf, rows)?;
    Ok(buf)
}

fn count(rows: &[FeatureVector], l: RegionLabel) -> usize {
    rows.iter().filter(|r| r.label == Some(l)).count()
}

pub fn simulate(config: &Path, out: Option<PathBuf>, map: usize, force: bool) -> Result<PathBuf, CliError> {
    let (cfg, exp) = load(config)?;
    let dir = out_dir(out, &cfg)?;
    let d = simulate_map(&exp, map)?;
    let test: Vec<FeatureVector> = d.test_h0.into_iter().chain(d.test_h1).collect();
    let mut o = Outputs::new(dir);
    let notes = vec![
        format!("map {map}"),
        format!("train rows {} (H0 {}, H1 {})", d.train.len(), count(&d.train, RegionLabel::H0), count(&d.train, RegionLabel::H1)),
        format!("validation rows {}", d.valid.len()),
        format!("test rows {} per class", exp.n_test),
        format!("k_f {}, raw draws per row {}", exp.k_f, exp.k_f),
    ];
    o.add("train.csv", dataset_csv(&d.train)?);
    o.add("val.csv", dataset_csv(&d.valid)?);
    o.add("test.csv", dataset_csv(&test)?);
    o.finish("simulate", cfg.seed, &cfg, &notes, force)
}

/// Applies the one-class rule: H1 rows are an error unless dropping them
/// was asked for.
fn one_class_rows(rows: Vec<FeatureVector>, drop: bool) -> Result<Vec<FeatureVector>, CliError> {
    let n1 = count(&rows, RegionLabel::H1);
    if n1 == 0 {
        return Ok(rows);
    }
    if !drop {
        return Err(Error::Data(format!("h1-rows-present: {n1} H1 rows given to a one-class model (use --drop-h1-rows)")).into());
    }
    log::warn!("dropping {n1} H1 rows");
    Ok(rows.into_iter().filter(|r| r.label != Some(RegionLabel::H1)).collect())
}

pub fn train(config: &Path, data: &Path, valid: Option<&Path>, out: Option<PathBuf>, drop_h1: bool, force: bool) -> Result<PathBuf, CliError> {
    let (cfg, exp) = load(config)?;
    let dir = out_dir(out, &cfg)?;
    let n = exp.scenario.n_aps();
    let mut rows = read_rows(data)?;
    let mut valid = valid.map(read_rows).transpose()?;
    check_dims(&rows, n)?;
    if let Some(v) = &valid {
        check_dims(v, n)?;
    }
    if exp.model.is_one_class() {
        let drop = drop_h1 || cfg.training.drop_h1_rows;
        rows = one_class_rows(rows, drop)?;
        valid = valid.map(|v| one_class_rows(v, drop)).transpose()?;
    }
    let model = train_model(&exp.model, &exp.context(), &rows, valid.as_deref(), cfg.seed)?;
    let text = model.to_text().unwrap_or_else(|| format!("{CONFIG_DEFINED} {}\n", exp.model.id()));
    let mut report = format!("model {}\ntraining rows {}\n", exp.model.id(), rows.len());
    if let TrainedModel::Mlp(m) = &model {
        report.push_str("loss_trace");
        for v in &m.loss_trace {
            let _ = write!(report, " {v:e}");
        }
        report.push('\n');
    }
    let summary = model.report();
    if !summary.is_empty() {
        let _ = writeln!(report, "{summary}");
    }
    let mut o = Outputs::new(dir);
    o.add("model.txt", text);
    o.add("report.txt", report);
    let notes = vec![format!("data {} (sha256 {})", data.display(), sha256_hex(read_text(data)?.as_bytes())), summary];
    o.finish("train", cfg.seed, &cfg, &notes, force)
}

fn load_model(path: &Path, cfg: &RunConfig, exp: &Experiment) -> Result<TrainedModel, CliError> {
    let text = read_text(path)?;
    if let Some(kind) = text.strip_prefix(CONFIG_DEFINED) {
        if kind.trim() != exp.model.id() {
            return Err(CliError::Config(format!("model file is for {}, config asks for {}", kind.trim(), exp.model.id())));
        }
        return Ok(train_model(&exp.model, &exp.context(), &[], None, cfg.seed)?);
    }
    Ok(TrainedModel::from_text(&text)?)
}

fn rates_header() -> &'static str {
    "target_fa,threshold,calibration_fa,p_fa,p_md,p_fa_lo,p_fa_hi,p_md_lo,p_md_hi"
}

fn operating_rows(model: &TrainedModel, calib_h0: &[FeatureVector], test: &[FeatureVector], targets: &[f64]) -> Result<String, CliError> {
    let score = |a: &FeatureVector| model.score(a);
    let s_cal = score_all(&score, calib_h0)?;
    let s_test = score_all(&score, test)?;
    let truth: Vec<RegionLabel> = test.iter().map(|r| r.label.ok_or_else(|| Error::Data("unlabeled test row".into()))).collect::<Result<_, _>>()?;
    let mut s = String::new();
    for &t in targets {
        let cal = calibrate_threshold(&s_cal, t)?;
        let decisions: Vec<RegionLabel> = s_test.iter().map(|&x| irlv::eval::decide(x, cal.threshold)).collect();
        let r = estimate_rates(&decisions, &truth)?;
        let _ = writeln!(
            s,
            "{t},{},{},{},{},{},{},{},{}",
            cal.threshold, cal.empirical_fa, r.p_fa, r.p_md, r.fa_ci.0, r.fa_ci.1, r.md_ci.0, r.md_ci.1
        );
    }
    Ok(s)
}

pub fn evaluate(
    config: &Path,
    model: &Path,
    data: &Path,
    calibration: Option<&Path>,
    out: Option<PathBuf>,
    force: bool,
) -> Result<PathBuf, CliError> {
    let (cfg, exp) = load(config)?;
    let dir = out_dir(out, &cfg)?;
    let m = load_model(model, &cfg, &exp)?;
    let mut test = read_rows(data)?;
    check_dims(&test, exp.scenario.n_aps())?;
    fill_links(&mut test, &exp.scenario)?;
    let roc = evaluate_model(&m, &test, exp.n_thresholds)?.with_meta(RocMeta {
        scenario: scenario_id(&exp.scenario).into(),
        model: exp.model.id().into(),
        seed: cfg.seed,
    });
    let mut notes = vec![format!("AUC {}", roc.auc())];
    let calib: Vec<FeatureVector> = match calibration {
        Some(p) => {
            let mut rows = read_rows(p)?;
            check_dims(&rows, exp.scenario.n_aps())?;
            fill_links(&mut rows, &exp.scenario)?;
            rows
        }
        None => {
            log::warn!("no calibration set; thresholds are set on the test H0 rows");
            notes.push("thresholds calibrated on the test H0 rows".into());
            test.clone()
        }
    };
    let calib_h0: Vec<FeatureVector> = calib.into_iter().filter(|r| r.label == Some(RegionLabel::H0)).collect();
    if calib_h0.is_empty() {
        return Err(Error::EmptyClass("empty-class: no H0 rows to calibrate on".into()).into());
    }
    let mut o = Outputs::new(dir);
    o.add("roc.csv", roc.to_csv());
    o.add("operating.csv", format!("{}\n{}", rates_header(), operating_rows(&m, &calib_h0, &test, &exp.target_fa)?));
    o.finish("evaluate", cfg.seed, &cfg, &notes, force)
}

fn mean_auc(r: &ExperimentResult) -> f64 {
    r.maps.iter().map(|m| m.roc.auc()).sum::<f64>() / r.maps.len() as f64
}

fn summary_header(fas: &[f64]) -> String {
    let mut h = String::from("curve,model,n_maps,skipped,mean_auc");
    for fa in fas {
        let _ = write!(h, ",md_at_{fa},md_at_{fa}_lo,md_at_{fa}_hi");
    }
    h.push('\n');
    h
}

fn summary_row(name: &str, model: &str, r: &ExperimentResult, fas: &[f64]) -> String {
    let mut s = format!("{name},{model},{},{},{}", r.maps.len(), r.skipped.len(), mean_auc(r));
    for &fa in fas {
        let (m, lo, hi) = r.md_ci(fa);
        let _ = write!(s, ",{m},{lo},{hi}");
    }
    s.push('\n');
    s
}

fn skipped_notes(name: &str, r: &ExperimentResult) -> Vec<String> {
    r.skipped.iter().map(|(i, e)| format!("{name}: map {i} skipped: {e}")).collect()
}

pub fn roc(config: &Path, out: Option<PathBuf>, force: bool) -> Result<PathBuf, CliError> {
    let (cfg, exp) = load(config)?;
    let dir = out_dir(out, &cfg)?;
    let r = run_experiment(&exp)?;
    let mut o = Outputs::new(dir);
    let mut ops = format!("map,{}\n", rates_header().replace(",calibration_fa", ""));
    for m in &r.maps {
        o.add(format!("roc_map{:03}.csv", m.map), m.roc.to_csv());
        for p in &m.operating {
            let q = &p.rates;
            let _ = writeln!(
                ops,
                "{},{},{},{},{},{},{},{},{}",
                m.map, p.target_fa, p.threshold, q.p_fa, q.p_md, q.fa_ci.0, q.fa_ci.1, q.md_ci.0, q.md_ci.1
            );
        }
    }
    o.add("roc_average.csv", r.average.to_csv());
    o.add("operating.csv", ops);
    let fas = exp.target_fa.clone();
    o.add("summary.csv", summary_header(&fas) + &summary_row("run", exp.model.id(), &r, &fas));
    let mut notes: Vec<String> = r.maps.iter().map(|m| format!("map {}: {}", m.map, m.train_report)).collect();
    notes.extend(skipped_notes("run", &r));
    o.finish("roc", cfg.seed, &cfg, &notes, force)
}

pub fn parse_roi(s: &str) -> Result<Rect, CliError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Config(format!("ROI must be x0,y0,x1,y1, got {s:?}")))?;
    if v.len() != 4 {
        return Err(CliError::Config(format!("ROI must be x0,y0,x1,y1, got {s:?}")));
    }
    Ok(Rect::new(v[0], v[1], v[2], v[3])?)
}

fn read_aps(path: &Path) -> Result<Vec<Position>, CliError> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line.split(',').map(|t| t.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| {
            Error::Data(format!("{}: line {}: expected x,y", path.display(), i + 1))
        })?;
        if v.len() != 2 || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Data(format!("{}: line {}: expected x,y", path.display(), i + 1)).into());
        }
        out.push(Position::new(v[0], v[1]));
    }
    Ok(out)
}

#[derive(Serialize)]
struct IngestEcho {
    grid: String,
    grid_sha256: String,
    roi: [f64; 4],
    n_train: usize,
    seed: u64,
    aps: Vec<[f64; 2]>,
}

pub struct IngestArgs<'a> {
    pub grid: &'a Path,
    pub roi: &'a str,
    pub n_train: usize,
    pub seed: u64,
    pub aps: Option<&'a Path>,
    pub out: PathBuf,
    pub force: bool,
}

pub fn ingest(a: IngestArgs) -> Result<PathBuf, CliError> {
    let roi = parse_roi(a.roi)?;
    let mut rows = read_rows(a.grid)?;
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: no rows", a.grid.display())).into());
    }
    check_dims(&rows, rows[0].len())?;
    let aps = a.aps.map(read_aps).transpose()?.unwrap_or_default();
    if !aps.is_empty() && aps.len() != rows[0].len() {
        return Err(Error::DimensionMismatch { expected: rows[0].len(), found: aps.len() }.into());
    }
    let dups = warn_duplicate_aps(&aps);
    label_by_roi(&mut rows, &roi)?;
    let n_cells = rows.len();
    let (train, test) = split_train_test(rows, a.n_train, a.seed)?;
    let mut notes = vec![format!("{n_cells} cells, {} train, {} test", train.len(), test.len())];
    if let Some(s) = grid_spacing(&train.iter().chain(&test).cloned().collect::<Vec<_>>()) {
        notes.push(format!("grid spacing {s} m"));
    }
    if dups > 0 {
        notes.push(format!("{dups} APs share coordinates with an earlier AP"));
    }
    let echo = IngestEcho {
        grid: a.grid.display().to_string(),
        grid_sha256: sha256_hex(read_text(a.grid)?.as_bytes()),
        roi: [roi.x0, roi.y0, roi.x1, roi.y1],
        n_train: a.n_train,
        seed: a.seed,
        aps: aps.iter().map(|p| [p.x, p.y]).collect(),
    };
    let mut o = Outputs::new(a.out);
    o.add("train.csv", dataset_csv(&train)?);
    o.add("test.csv", dataset_csv(&test)?);
    o.finish("ingest", a.seed, &echo, &notes, a.force)
}

#[derive(Serialize)]
struct FigureEcho<'a> {
    figure: &'a str,
    quick: bool,
    data: Option<String>,
    plan: &'a Plan,
}

pub struct FigureArgs<'a> {
    pub figure: &'a str,
    pub quick: bool,
    pub data: Option<&'a Path>,
    pub roi: Option<&'a str>,
    pub out: PathBuf,
    pub force: bool,
}

pub fn reproduce_figure(a: FigureArgs) -> Result<PathBuf, CliError> {
    let plan = presets::figure(a.figure, a.quick)?;
    if a.data.is_some() && !matches!(plan, Plan::Grid(_)) {
        return Err(CliError::Config(format!("--data only applies to grid figures, not {}", a.figure)));
    }
    let mut o = Outputs::new(a.out);
    let mut notes = Vec::new();
    let seed;
    match &plan {
        Plan::Curves(curves) => {
            seed = curves.first().map_or(0, |c| c.experiment.seed);
            let fas = [0.05, 0.1, 0.2];
            let mut summary = summary_header(&fas);
            for c in curves {
                log::info!("running {}", c.name);
                let r = run_experiment(&c.experiment)?;
                o.add(format!("{}.csv", c.name), r.average.to_csv());
                summary.push_str(&summary_row(&c.name, c.experiment.model.id(), &r, &fas));
                notes.extend(skipped_notes(&c.name, &r));
                notes.push(format!(
                    "{}: {} maps, {} training points, {} test points per class, k_f {}",
                    c.name,
                    r.maps.len(),
                    c.experiment.n_train,
                    c.experiment.n_test,
                    c.experiment.k_f
                ));
            }
            o.add("summary.csv", summary);
        }
        Plan::Grid(g) => {
            seed = g.base.seed;
            let n = g.base.scenario.n_aps();
            let mut rows = match a.data {
                Some(p) => {
                    let mut rows = read_rows(p)?;
                    check_dims(&rows, n)?;
                    fill_links(&mut rows, &g.base.scenario)?;
                    rows
                }
                None => {
                    notes.push(format!("synthetic {0} x {0} grid from one simulated map", g.n_side));
                    simulate_grid(&g.base, g.n_side)?
                }
            };
            let roi = match (a.roi, &g.base.scenario) {
                (Some(s), _) => parse_roi(s)?,
                (None, Scenario::Urban(u)) => u.roi,
                (None, _) => return Err(CliError::Config("grid figures need an ROI".into())),
            };
            label_by_roi(&mut rows, &roi)?;
            let n_rows = rows.len();
            let (mut train, test) = split_train_test(rows, g.n_train.min(n_rows.saturating_sub(1)), seed)?;
            let n_val = (train.len() / 5).max(1);
            let valid = train.split_off(train.len() - n_val);
            notes.push(format!("{n_rows} cells: {} train, {} validation, {} test", train.len(), valid.len(), test.len()));
            let mut summary = String::from("curve,model,auc,md_at_0.05,md_at_0.1,md_at_0.2\n");
            for (name, spec) in &g.models {
                log::info!("training {name}");
                let m = train_model(spec, &g.base.context(), &train, Some(&valid), seed)?;
                let roc: RocCurve = evaluate_model(&m, &test, g.base.n_thresholds)?;
                let _ = writeln!(summary, "{name},{},{},{},{},{}", spec.id(), roc.auc(), roc.md_at_fa(0.05), roc.md_at_fa(0.1), roc.md_at_fa(0.2));
                o.add(format!("{name}.csv"), roc.to_csv());
                notes.push(format!("{name}: {}", m.report()));
            }
            o.add("summary.csv", summary);
        }
    }
    let echo = FigureEcho { figure: a.figure, quick: a.quick, data: a.data.map(|p| p.display().to_string()), plan: &plan };
    o.finish("reproduce-figure", seed, &echo, &notes, a.force)
}
