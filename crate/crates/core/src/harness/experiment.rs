//! Runs, compression reports and the files they leave on disk.
//!
//! Layout under the output directory:
//!
//! - `manifest.txt`: every key of the experiment spec.
//! - `summary.csv`: one row per replication.
//! - `hoeffding.csv`, `inequalities.csv`: when those suites were requested.
//! - `rep_NNN/`: `data.txt`, `init.ckpt`, `end.ckpt` (the model after the last
//!   encoded epoch), `final.ckpt`, `trace.csv`, `orders.csv`,
//!   `checkpoints.csv`, `report.csv`, `summary.txt`, `plots.csv` and
//!   `epochs/epoch_NNNN.epc`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::hoeffding::{default_checks, verify_hoeffding, HoeffdingResult, HOEFFDING_HEADER};
use super::inequalities::{run_inequality_suite, SuiteRow, SUITE_HEADER};
use super::{ExperimentSpec, HarnessError};
use crate::codec::perm_width;
use crate::engine::{
    checkpoint_from_bytes, checkpoint_to_bytes, format_rational, run, traces_to_csv, EpochTrace,
    RunConfig, RunResult,
};
use crate::epoch_codec::{
    decode_epoch, decode_run_strict, encode_epoch, epoch_accounting, epoch_code_from_bytes,
    epoch_code_to_bytes, AccountingRow, EpochCode, EpochCodecError, EpochContext, Mode, SideInfo,
    ACCOUNTING_HEADER,
};
use crate::model::{generate_dataset, Dataset, Model};
use crate::numerics::FixedVector;
use crate::Rational;

/// Totals over one replication's encoded epochs.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub replication: usize,
    pub epochs_run: usize,
    pub terminated: bool,
    pub final_accuracy: Rational,
    /// `α·L` the configuration was validated with.
    pub alpha_l: f64,
    pub l_analytic: bool,
    /// Complete epochs, all of them encoded.
    pub encoded_epochs: usize,
    pub total_measured: u64,
    /// Measured bits of good epochs plus the baseline for bad ones.
    pub total_charged: u64,
    /// `⌈log2 n!⌉`.
    pub baseline_per_epoch: u64,
    /// `t·⌈log2 n!⌉`.
    pub baseline_total: u64,
    pub good_epochs: usize,
    pub good_fraction: f64,
    /// `d·coordinate_bits` per epoch.
    pub model_charge: u64,
    /// `n·(p·coordinate_bits + 1) + d·coordinate_bits`: the dataset and the
    /// starting model written out plainly.
    pub description_bits: u64,
    /// `(t·⌈log2 n!⌉ − total_charged − t·model_charge) / t`.
    pub net_savings_per_epoch: Option<f64>,
    /// `⌊description_bits / net_savings_per_epoch⌋` when savings are positive.
    pub t_star: Option<u64>,
    pub hint_bits: u64,
    pub case_bounds_hold: bool,
}

pub const SUMMARY_HEADER: &str = "replication,epochs_run,terminated,final_accuracy,alpha_l,\
l_analytic,encoded_epochs,total_measured,total_charged,baseline_per_epoch,baseline_total,\
good_epochs,good_fraction,model_charge,description_bits,net_savings_per_epoch,t_star,hint_bits,\
case_bounds_hold";

impl Summary {
    pub fn from_rows(
        rows: &[AccountingRow],
        cfg: &RunConfig,
        replication: usize,
        res: &RunResult,
        final_accuracy: Rational,
        alpha_l: f64,
        l_analytic: bool,
    ) -> Self {
        let t = rows.len() as u64;
        let cb = cfg.grid.coordinate_bits() as u64;
        let (n, p, d) = (cfg.n() as u64, cfg.data.p as u64, cfg.d() as u64);
        let baseline_per_epoch = perm_width(cfg.n());
        let total_charged: u64 = rows.iter().map(|r| r.charged_bits).sum();
        let model_charge = d * cb;
        let description_bits = n * (p * cb + 1) + d * cb;
        let good_epochs = rows.iter().filter(|r| r.good).count();
        let net = (t * baseline_per_epoch) as i128 - total_charged as i128 - (t * model_charge) as i128;
        Summary {
            replication,
            epochs_run: res.traces.len(),
            terminated: res.terminated,
            final_accuracy,
            alpha_l,
            l_analytic,
            encoded_epochs: rows.len(),
            total_measured: rows.iter().map(|r| r.measured_bits).sum(),
            total_charged,
            baseline_per_epoch,
            baseline_total: t * baseline_per_epoch,
            good_epochs,
            good_fraction: if t == 0 { 0.0 } else { good_epochs as f64 / t as f64 },
            model_charge,
            description_bits,
            net_savings_per_epoch: (t > 0).then(|| net as f64 / t as f64),
            // ⌊C / (net/t)⌋ = ⌊C·t / net⌋
            t_star: (net > 0).then(|| ((description_bits as i128 * t as i128) / net) as u64),
            hint_bits: rows.iter().map(|r| r.hint_bits).sum(),
            case_bounds_hold: rows.iter().all(|r| r.case_bound_holds),
        }
    }

    pub fn to_csv(&self) -> String {
        let opt_f = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        format!(
            "{},{},{},{},{:.6},{},{},{},{},{},{},{},{:.6},{},{},{},{},{},{}",
            self.replication,
            self.epochs_run,
            self.terminated as u8,
            format_rational(&self.final_accuracy),
            self.alpha_l,
            self.l_analytic as u8,
            self.encoded_epochs,
            self.total_measured,
            self.total_charged,
            self.baseline_per_epoch,
            self.baseline_total,
            self.good_epochs,
            self.good_fraction,
            self.model_charge,
            self.description_bits,
            opt_f(self.net_savings_per_epoch),
            self.t_star.map(|v| v.to_string()).unwrap_or_default(),
            self.hint_bits,
            self.case_bounds_hold as u8,
        )
    }

    /// The same fields as `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in SUMMARY_HEADER.split(',').zip(self.to_csv().split(',')) {
            writeln!(out, "{k}={v}").expect("string");
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompressionReport {
    pub rows: Vec<AccountingRow>,
    pub summary: Summary,
}

impl CompressionReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{ACCOUNTING_HEADER}\n");
        for r in &self.rows {
            out.push_str(&r.to_csv());
            out.push('\n');
        }
        out
    }
}

pub const PLOTS_HEADER: &str =
    "epoch,case,measured_bits,charged_bits,baseline_bits,per_epoch_target,beta_hat,savings";

fn ratio_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Per-epoch series for plotting. `savings` is baseline minus measured.
pub fn emit_plots_data(report: &CompressionReport) -> String {
    let mut out = format!("{PLOTS_HEADER}\n");
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{:.6},{:.9},{}",
            r.epoch,
            r.case.tag(),
            r.measured_bits,
            r.charged_bits,
            r.baseline_bits,
            r.per_epoch_target,
            ratio_f64(&r.beta_hat),
            r.baseline_bits as i64 - r.measured_bits as i64
        )
        .expect("string");
    }
    out
}

/// Column sums read back from a report CSV.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReportTotals {
    pub epochs: usize,
    pub measured: u64,
    pub charged: u64,
    pub baseline: u64,
    pub good: usize,
}

pub fn report_totals(csv: &str) -> Result<ReportTotals, HarnessError> {
    let bad = |reason: String| HarnessError::Artifact {
        path: PathBuf::from("report.csv"),
        reason,
    };
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty".into()))?.split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| bad(format!("no {name} column")))
    };
    let (m, c, b, g) = (col("measured_bits")?, col("charged_bits")?, col("baseline_bits")?, col("good")?);
    let mut t = ReportTotals::default();
    for (no, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != header.len() {
            return Err(bad(format!("row {} has {} fields", no + 1, f.len())));
        }
        let num = |i: usize| f[i].parse::<u64>().map_err(|_| bad(format!("row {}: {:?}", no + 1, f[i])));
        t.epochs += 1;
        t.measured += num(m)?;
        t.charged += num(c)?;
        t.baseline += num(b)?;
        t.good += (num(g)? == 1) as usize;
    }
    Ok(t)
}

/// Everything one replication produced.
#[derive(Clone, Debug)]
pub struct Replication {
    pub index: usize,
    pub config: RunConfig,
    pub data: Dataset,
    pub init: Model,
    pub result: RunResult,
    pub codes: Vec<EpochCode>,
    pub report: CompressionReport,
}

fn complete(res: &RunResult) -> Vec<&EpochTrace> {
    res.completed().collect()
}

fn order_line(epoch: usize, order: &[u32]) -> String {
    let ids: Vec<String> = order.iter().map(|x| x.to_string()).collect();
    format!("{epoch},{}\n", ids.join(" "))
}

impl Replication {
    /// The model after the last encoded epoch.
    pub fn end_model(&self) -> &FixedVector {
        complete(&self.result)
            .last()
            .map(|t| t.final_checkpoint())
            .unwrap_or(self.init.weights())
    }

    /// Files relative to the replication directory, in a fixed order.
    pub fn artifacts(&self) -> Vec<(PathBuf, Vec<u8>)> {
        let scale = self.config.grid.scale();
        let traces = complete(&self.result);
        let mut orders = String::from("epoch,order\n");
        let mut checkpoints = String::from("epoch,j,weights\n");
        for t in &traces {
            orders.push_str(&order_line(t.epoch, &t.permutation.order));
            for (k, w) in t.checkpoints.iter().enumerate() {
                let raw: Vec<String> = w.raw().map(|r| r.to_string()).collect();
                writeln!(checkpoints, "{},{},{}", t.epoch, k + 1, raw.join(";")).expect("string");
            }
        }
        let mut files = vec![
            (PathBuf::from("data.txt"), self.data.to_text().into_bytes()),
            (PathBuf::from("init.ckpt"), checkpoint_to_bytes(self.init.weights(), scale)),
            (PathBuf::from("end.ckpt"), checkpoint_to_bytes(self.end_model(), scale)),
            (PathBuf::from("final.ckpt"), checkpoint_to_bytes(self.result.final_model.weights(), scale)),
            (PathBuf::from("trace.csv"), traces_to_csv(&self.result.traces).into_bytes()),
            (PathBuf::from("orders.csv"), orders.into_bytes()),
            (PathBuf::from("checkpoints.csv"), checkpoints.into_bytes()),
            (PathBuf::from("report.csv"), self.report.to_csv().into_bytes()),
            (PathBuf::from("summary.txt"), self.report.summary.to_text().into_bytes()),
            (PathBuf::from("plots.csv"), emit_plots_data(&self.report).into_bytes()),
        ];
        for code in &self.codes {
            files.push((
                Path::new("epochs").join(format!("epoch_{:04}.epc", code.epoch)),
                epoch_code_to_bytes(code),
            ));
        }
        files
    }
}

fn epoch_err(replication: usize, epoch: usize) -> impl Fn(EpochCodecError) -> HarnessError {
    move |source| HarnessError::Epoch {
        replication,
        epoch,
        source,
    }
}

/// Train, encode every complete epoch, decode it back and account for it.
pub fn run_replication(spec: &ExperimentSpec, index: usize) -> Result<Replication, HarnessError> {
    let cfg = spec.replication(index);
    cfg.check_shape()?;
    let data = generate_dataset(&cfg.data, cfg.grid)?;
    let bound = cfg.validate(&data)?;
    let init = Model::initial(cfg.kind, cfg.data.p, cfg.grid, cfg.seed);
    let result = run(&cfg, &data, init.clone())?;
    let ctx = EpochContext {
        data: &data,
        model: &init,
        alpha: cfg.alpha,
    };
    let model_charge = cfg.d() as u64 * cfg.grid.coordinate_bits() as u64;
    let traces = complete(&result);
    let mut rows = Vec::with_capacity(traces.len());
    let mut codes = Vec::with_capacity(traces.len());
    for t in &traces {
        let err = epoch_err(index, t.epoch);
        let enc = encode_epoch(t, &ctx, cfg.beta(), spec.mode).map_err(&err)?;
        rows.push(epoch_accounting(&enc, t, cfg.beta(), model_charge).map_err(&err)?);
        codes.push(enc.code);
    }
    match spec.mode {
        Mode::Accounting => {
            for (t, code) in traces.iter().zip(&codes) {
                let side = SideInfo::Accounting {
                    checkpoints: &t.checkpoints,
                };
                let dec = decode_epoch(code, &ctx, side).map_err(epoch_err(index, t.epoch))?;
                if dec.order != t.permutation.order {
                    return Err(HarnessError::Decode(format!("replication {index}, epoch {}", t.epoch)));
                }
            }
        }
        Mode::Strict => {
            let end = traces.last().map(|t| t.final_checkpoint()).unwrap_or(init.weights());
            let (orders, start) = decode_run_strict(&codes, &ctx, end)?;
            for (t, o) in traces.iter().zip(&orders) {
                if o != &t.permutation.order {
                    return Err(HarnessError::Decode(format!("replication {index}, epoch {}", t.epoch)));
                }
            }
            if &start != init.weights() {
                return Err(HarnessError::Decode(format!(
                    "replication {index}: reverse search ended at {start}, not the initial model"
                )));
            }
        }
    }
    let final_accuracy = result.final_model.accuracy(data.elements())?;
    let summary = Summary::from_rows(&rows, &cfg, index, &result, final_accuracy, bound.alpha_l, bound.analytic);
    Ok(Replication {
        index,
        config: cfg,
        data,
        init,
        result,
        codes,
        report: CompressionReport { rows, summary },
    })
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub replications: Vec<Replication>,
    pub hoeffding: Vec<HoeffdingResult>,
    pub inequalities: Vec<SuiteRow>,
}

impl ExperimentOutcome {
    pub fn reports(&self) -> impl Iterator<Item = &CompressionReport> {
        self.replications.iter().map(|r| &r.report)
    }

    /// Every requested suite passed.
    pub fn suites_pass(&self) -> bool {
        self.hoeffding.iter().all(|h| h.verdict == Some(true)) && self.inequalities.iter().all(SuiteRow::pass)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, bytes).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>, HarnessError> {
    fs::read(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn replication_dir(out: &Path, index: usize) -> PathBuf {
    out.join(format!("rep_{index:03}"))
}

/// Run every replication in parallel, then the requested suites, then write
/// all files.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome, HarnessError> {
    spec.validate()?;
    let replications = (0..spec.replications)
        .into_par_iter()
        .map(|r| run_replication(spec, r))
        .collect::<Result<Vec<_>, _>>()?;
    let hoeffding = if spec.suites.hoeffding {
        default_checks(spec.hoeffding_trials, spec.run.seed)
            .iter()
            .map(verify_hoeffding)
            .collect::<Result<Vec<_>, _>>()?
    } else {
        Vec::new()
    };
    let inequalities = if spec.suites.inequalities {
        run_inequality_suite()
    } else {
        Vec::new()
    };

    let out = &spec.out_dir;
    write_file(&out.join("manifest.txt"), spec.to_manifest().as_bytes())?;
    let mut summary = format!("{SUMMARY_HEADER}\n");
    for rep in &replications {
        summary.push_str(&rep.report.summary.to_csv());
        summary.push('\n');
        let dir = replication_dir(out, rep.index);
        let epochs = dir.join("epochs");
        if epochs.exists() {
            fs::remove_dir_all(&epochs).map_err(|source| HarnessError::Io {
                path: epochs.clone(),
                source,
            })?;
        }
        for (rel, bytes) in rep.artifacts() {
            write_file(&dir.join(rel), &bytes)?;
        }
    }
    write_file(&out.join("summary.csv"), summary.as_bytes())?;
    if spec.suites.hoeffding {
        let mut text = format!("{HOEFFDING_HEADER}\n");
        for h in &hoeffding {
            text.push_str(&h.to_csv());
            text.push('\n');
        }
        write_file(&out.join("hoeffding.csv"), text.as_bytes())?;
    }
    if spec.suites.inequalities {
        let mut text = format!("{SUITE_HEADER}\n");
        for row in &inequalities {
            text.push_str(&row.to_csv());
            text.push('\n');
        }
        write_file(&out.join("inequalities.csv"), text.as_bytes())?;
    }
    Ok(ExperimentOutcome {
        replications,
        hoeffding,
        inequalities,
    })
}

fn artifact_err(path: &Path, reason: impl Into<String>) -> HarnessError {
    HarnessError::Artifact {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn read_checkpoints(path: &Path) -> Result<Vec<(usize, Vec<FixedVector>)>, HarnessError> {
    let text = String::from_utf8(read_file(path)?).map_err(|_| artifact_err(path, "not UTF-8"))?;
    let mut out: Vec<(usize, Vec<FixedVector>)> = Vec::new();
    for line in text.lines().skip(1) {
        let mut f = line.split(',');
        let (Some(e), Some(_), Some(w), None) = (f.next(), f.next(), f.next(), f.next()) else {
            return Err(artifact_err(path, format!("bad line {line:?}")));
        };
        let epoch: usize = e.parse().map_err(|_| artifact_err(path, format!("bad epoch {e:?}")))?;
        let raw = w
            .split(';')
            .map(|v| v.parse::<i64>().map_err(|_| artifact_err(path, format!("bad weight {v:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        match out.last_mut() {
            Some((last, ws)) if *last == epoch => ws.push(FixedVector::from_raw(raw)),
            _ => out.push((epoch, vec![FixedVector::from_raw(raw)])),
        }
    }
    Ok(out)
}

/// Decode the epoch files of one replication directory using only what
/// the spec's mode allows: the dataset file plus `end.ckpt` in strict mode,
/// plus `checkpoints.csv` in accounting mode. Returns `(epoch, order)` pairs.
pub fn decode_artifacts(spec: &ExperimentSpec, dir: &Path) -> Result<Vec<(usize, Vec<u32>)>, HarnessError> {
    let data_path = dir.join("data.txt");
    let text = String::from_utf8(read_file(&data_path)?).map_err(|_| artifact_err(&data_path, "not UTF-8"))?;
    let data = Dataset::from_text(&text, spec.run.grid.clip())?;
    let model = Model::initial(spec.run.kind, data.p(), spec.run.grid, 0);
    let ctx = EpochContext {
        data: &data,
        model: &model,
        alpha: spec.run.alpha,
    };
    let epoch_dir = dir.join("epochs");
    let mut names: Vec<PathBuf> = match fs::read_dir(&epoch_dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "epc"))
            .collect(),
        Err(_) => Vec::new(),
    };
    names.sort();
    let codes = names
        .iter()
        .map(|p| epoch_code_from_bytes(&read_file(p)?).map_err(HarnessError::from))
        .collect::<Result<Vec<_>, _>>()?;
    match spec.mode {
        Mode::Strict => {
            let end_path = dir.join("end.ckpt");
            let (end, _) = checkpoint_from_bytes(&read_file(&end_path)?)?;
            let (orders, _) = decode_run_strict(&codes, &ctx, &end)?;
            Ok(codes.iter().map(|c| c.epoch).zip(orders).collect())
        }
        Mode::Accounting => {
            let ck_path = dir.join("checkpoints.csv");
            let checkpoints = read_checkpoints(&ck_path)?;
            codes
                .iter()
                .map(|code| {
                    let ws = checkpoints
                        .iter()
                        .find(|(e, _)| *e == code.epoch)
                        .map(|(_, ws)| ws)
                        .ok_or_else(|| artifact_err(&ck_path, format!("no checkpoints for epoch {}", code.epoch)))?;
                    let dec = decode_epoch(code, &ctx, SideInfo::Accounting { checkpoints: ws })?;
                    Ok((code.epoch, dec.order))
                })
                .collect()
        }
    }
}

/// `orders.csv` text for decoded orders.
pub fn orders_csv(orders: &[(usize, Vec<u32>)]) -> String {
    let mut out = String::from("epoch,order\n");
    for (e, o) in orders {
        out.push_str(&order_line(*e, o));
    }
    out
}
