use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::{collect, write_file, Dataset, Experiment, HarnessError, RunConfig};
use crate::active::{
    evaluate_errors, record_replay_trials, Condition, DecisionRule, ErrorTable, SweepRow,
    TrialTrajectory,
};
use crate::perception::{
    monte_carlo_cross_validate, train_histogram_model, write_model, PerceptionReport,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassRow {
    pub label_mm: f64,
    pub count: usize,
    pub p25_mm: f64,
    pub median_mm: f64,
    pub p75_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerceptionSummary {
    pub samples: usize,
    pub iqr_mm: f64,
    pub band_iqr_mm: f64,
    pub mean_abs_error_mm: f64,
    pub median_abs_error_mm: f64,
    pub ties: usize,
    pub per_class: Vec<ClassRow>,
}

impl From<&PerceptionReport> for PerceptionSummary {
    fn from(r: &PerceptionReport) -> Self {
        Self {
            samples: r.samples.len(),
            iqr_mm: r.iqr_mm,
            band_iqr_mm: r.band_iqr_mm,
            mean_abs_error_mm: r.mean_abs_error_mm,
            median_abs_error_mm: r.median_abs_error_mm,
            ties: r.samples.iter().filter(|s| s.tied).count(),
            per_class: r
                .per_class
                .iter()
                .map(|c| ClassRow {
                    label_mm: c.label,
                    count: c.count,
                    p25_mm: c.p25,
                    median_mm: c.median,
                    p75_mm: c.p75,
                })
                .collect(),
        }
    }
}

/// Summary of the reported trajectories and the sweep table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActiveReport {
    pub rule: DecisionRule,
    pub x_fix_mm: f64,
    pub trajectories: usize,
    /// Trajectories ending within one class width of the fixation point.
    pub converged: usize,
    pub forced: usize,
    pub max_end_offset_mm: f64,
    pub mean_decision_contacts: f64,
    pub mean_error_mm: f64,
    pub sweep: Vec<SweepRow>,
}

/// Everything `active_run` produced.
#[derive(Debug, Clone)]
pub struct ActiveRun {
    pub summary: ActiveReport,
    pub table: ErrorTable,
    /// Reported trajectories, stopped by the configured rule.
    pub trajectories: Vec<TrialTrajectory>,
    /// Full-length sweep trajectories.
    pub active: Vec<TrialTrajectory>,
    pub passive: Vec<TrialTrajectory>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedLedger {
    pub root: u64,
    pub derivation: String,
    pub collect: String,
    pub reference: String,
    pub frame_noise: String,
    pub cross_validation: String,
    pub active_trial: String,
    pub passive_trial: String,
    pub trial_start: String,
    pub trial_replay: String,
    pub trial_contact: String,
}

impl SeedLedger {
    pub fn new(root: u64) -> Self {
        let s = |x: &str| x.to_string();
        Self {
            root,
            derivation: s("derive(seed, path) folds each u64 of path into seed with SplitMix64"),
            collect: s("derive(root, [0x10, run, class])"),
            reference: s("derive(root, [0x11, repeat])"),
            frame_noise: s("derive(series_seed, [0x40, frame]); jitter [0x41], pixels [0x42]"),
            cross_validation: s("derive(root, [0x20, sample])"),
            active_trial: s("derive(root, [0x30, trial])"),
            passive_trial: s("derive(root, [0x31, trial])"),
            trial_start: s("derive(trial_seed, [0])"),
            trial_replay: s("derive(trial_seed, [2])"),
            trial_contact: s("derive(trial_seed, [1, contact])"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSection {
    pub experiment: Experiment,
    pub perception: PerceptionSummary,
    pub active: ActiveReport,
    pub config: RunConfig,
}

/// The full replication report. Wall-clock timings are kept in
/// [`Timings`] so that this stays a pure function of the seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub headless: bool,
    pub seeds: SeedLedger,
    pub experiments: Vec<ExperimentSection>,
}

impl ExperimentReport {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serialises")
    }

    pub fn section(&self, e: Experiment) -> Option<&ExperimentSection> {
        self.experiments.iter().find(|s| s.experiment == e)
    }
}

/// Seconds per stage, keyed `<experiment>.<stage>`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Timings {
    pub seconds: BTreeMap<String, f64>,
}

impl Timings {
    fn time<T>(&mut self, key: String, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.seconds.insert(key, start.elapsed().as_secs_f64());
        out
    }
}

fn report_dir(out: &Path, e: Experiment) -> std::path::PathBuf {
    out.join("reports").join(e.name())
}

fn perception_table(r: &PerceptionReport) -> String {
    let mut s = format!(
        "# iqr_mm={}\tband_iqr_mm={}\tmean_abs_error_mm={}\tmedian_abs_error_mm={}\n",
        r.iqr_mm, r.band_iqr_mm, r.mean_abs_error_mm, r.median_abs_error_mm
    );
    s.push_str("label_mm\tcount\tp25_mm\tmedian_mm\tp75_mm\n");
    for c in &r.per_class {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}",
            c.label, c.count, c.p25, c.median, c.p75
        );
    }
    s
}

fn perception_points(r: &PerceptionReport) -> String {
    let mut s =
        String::from("sample\ttrain_run\ttest_run\ttruth_mm\tperceived_mm\terror_mm\ttied\n");
    for (i, p) in r.samples.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i}\t{}\t{}\t{}\t{}\t{}\t{}",
            p.train_run,
            p.test_run,
            p.truth_mm,
            p.perceived_mm,
            p.error_mm(),
            u8::from(p.tied)
        );
    }
    s
}

/// Monte Carlo cross validation of the dataset, plus a model trained on
/// every run.
pub fn evaluate(
    dataset: &Dataset,
    config: &RunConfig,
    out: &Path,
) -> Result<PerceptionReport, HarnessError> {
    let data = dataset.perceived();
    let hist = &config.perception.histogram;
    let report = monte_carlo_cross_validate(data, hist, config.perception.samples, config.seed)?;
    let dir = report_dir(out, dataset.manifest.experiment);
    write_file(
        &dir.join("perception.tsv"),
        perception_table(&report).as_bytes(),
    )?;
    write_file(
        &dir.join("perception_points.tsv"),
        perception_points(&report).as_bytes(),
    )?;

    let model = train_histogram_model(&data.all(), &data.classes, hist)?;
    let mut bytes = Vec::new();
    write_model(&model, &mut bytes)?;
    let name = format!("{}.vbhm", dataset.manifest.experiment.name());
    write_file(&out.join("models").join(name), &bytes)?;
    Ok(report)
}

fn rule_name(rule: DecisionRule) -> String {
    match rule {
        DecisionRule::Threshold(t) => format!("threshold\t{t}"),
        DecisionRule::FixedTime(t) => format!("fixed_time\t{t}"),
    }
}

fn sweep_table(table: &ErrorTable) -> String {
    let mut s = String::from(
        "condition\trule\tparameter\ttrials\tmean_decision_time\tmean_error_mm\tforced\n",
    );
    for r in &table.rows {
        let cond = match r.condition {
            Condition::Active => "active",
            Condition::Passive => "passive",
        };
        let _ = writeln!(
            s,
            "{cond}\t{}\t{}\t{}\t{}\t{}",
            rule_name(r.rule),
            r.trials,
            r.mean_decision_time,
            r.mean_error_mm,
            r.forced
        );
    }
    s
}

fn trajectory_file(t: &TrialTrajectory) -> String {
    let mut s = format!(
        "# start_mm={}\tdecision_class={}\tdecision_contacts={}\tforced={}\testimate_mm={}\tend_location_mm={}\terror_mm={}\n",
        t.start_mm, t.decision_class, t.decision_contacts, t.forced, t.estimate_mm, t.end_location_mm, t.error_mm
    );
    s.push_str("contact\tlocation_mm\tperceived_class\tperceived_mm\taction_mm\tmap_class\tmap_probability\n");
    for (i, c) in t.contacts.iter().enumerate() {
        let (map, p) = c
            .posterior
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |b, (j, &v)| if v > b.1 { (j, v) } else { b },
            );
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{map}\t{p}",
            i + 1,
            c.location_mm,
            c.perceived_class,
            c.perceived_mm,
            c.action_mm
        );
    }
    s
}

/// Active and passive trials replayed from the dataset: the sweep table
/// over `sweep_trials` trials per condition, and the first `trajectories`
/// active trials stopped by the configured rule.
pub fn active_run(
    dataset: &Dataset,
    config: &RunConfig,
    out: &Path,
) -> Result<ActiveRun, HarnessError> {
    let data = dataset.perceived();
    let classes = &data.classes;
    if *classes != config.protocol.classes()? {
        return Err(HarnessError::Config(format!(
            "dataset classes do not match the configured protocol ({} contacts, step {})",
            config.protocol.contacts, config.protocol.step_mm
        )));
    }
    let policy = config.policy(classes);
    policy
        .validate(classes)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let hist = &config.perception.histogram;
    let a = &config.active;
    let record = |c| -> Result<Vec<TrialTrajectory>, HarnessError> {
        Ok(
            record_replay_trials(data, hist, &policy, c, a.sweep_trials, config.seed)?
                .into_iter()
                .map(|(_, t)| t)
                .collect(),
        )
    };
    let active = record(Condition::Active)?;
    let passive = record(Condition::Passive)?;
    let table = evaluate_errors(classes, &active, &passive, &a.sweep, policy.max_contacts)?;
    let trajectories: Vec<TrialTrajectory> = active
        .iter()
        .take(a.trajectories)
        .map(|t| {
            t.decided(classes, policy.rule, policy.max_contacts)
                .expect("recorded to max_contacts")
        })
        .collect();

    let dir = report_dir(out, dataset.manifest.experiment);
    write_file(&dir.join("sweep.tsv"), sweep_table(&table).as_bytes())?;
    let mut index = String::from(
        "trial\tstart_mm\tdecision_contacts\tforced\tend_location_mm\testimate_mm\terror_mm\n",
    );
    for (i, t) in trajectories.iter().enumerate() {
        write_file(
            &dir.join("trajectories").join(format!("trial_{i:03}.tsv")),
            trajectory_file(t).as_bytes(),
        )?;
        let _ = writeln!(
            index,
            "{i}\t{}\t{}\t{}\t{}\t{}\t{}",
            t.start_mm,
            t.decision_contacts,
            u8::from(t.forced),
            t.end_location_mm,
            t.estimate_mm,
            t.error_mm
        );
    }
    write_file(&dir.join("trajectories.tsv"), index.as_bytes())?;

    let n = trajectories.len() as f64;
    let offsets = trajectories
        .iter()
        .map(|t| (t.end_location_mm - policy.x_fix).abs());
    let summary = ActiveReport {
        rule: policy.rule,
        x_fix_mm: policy.x_fix,
        trajectories: trajectories.len(),
        converged: offsets
            .clone()
            .filter(|d| *d <= classes.spacing() + 1e-9)
            .count(),
        forced: trajectories.iter().filter(|t| t.forced).count(),
        max_end_offset_mm: offsets.fold(0.0, f64::max),
        mean_decision_contacts: trajectories
            .iter()
            .map(|t| t.decision_contacts as f64)
            .sum::<f64>()
            / n,
        mean_error_mm: trajectories.iter().map(|t| t.error_mm).sum::<f64>() / n,
        sweep: table.rows.clone(),
    };
    Ok(ActiveRun {
        summary,
        table,
        trajectories,
        active,
        passive,
    })
}

/// Outputs of one experiment inside [`replicate_all`].
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub dataset: Dataset,
    pub perception: PerceptionReport,
    pub active: ActiveRun,
}

#[derive(Debug, Clone)]
pub struct Replication {
    pub report: ExperimentReport,
    pub runs: Vec<ExperimentRun>,
    pub timings: Timings,
}

/// Collects, evaluates and runs active perception for all three
/// experiments with default configs, then writes `report.toml` and
/// `timings.toml` under `out`.
pub fn replicate_all(seed: u64, out: &Path, headless: bool) -> Result<Replication, HarnessError> {
    let mut timings = Timings::default();
    let mut sections = Vec::new();
    let mut runs = Vec::new();
    for e in Experiment::ALL {
        let mut config = RunConfig::default_for(e);
        config.seed = seed;
        config.protocol.headless = headless;
        config.validate()?;
        let dataset = timings.time(format!("{e}.collect"), || collect(&config, out))?;
        let perception =
            timings.time(format!("{e}.evaluate"), || evaluate(&dataset, &config, out))?;
        let active = timings.time(format!("{e}.active_run"), || {
            active_run(&dataset, &config, out)
        })?;
        sections.push(ExperimentSection {
            experiment: e,
            perception: PerceptionSummary::from(&perception),
            active: active.summary.clone(),
            config,
        });
        runs.push(ExperimentRun {
            dataset,
            perception,
            active,
        });
    }
    let report = ExperimentReport {
        seed,
        headless,
        seeds: SeedLedger::new(seed),
        experiments: sections,
    };
    write_file(&out.join("report.toml"), report.to_toml().as_bytes())?;
    write_file(
        &out.join("timings.toml"),
        toml::to_string(&timings)
            .expect("timings serialise")
            .as_bytes(),
    )?;
    Ok(Replication {
        report,
        runs,
        timings,
    })
}
