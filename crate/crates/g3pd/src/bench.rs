//! Dataset ingestion, the misclassification metric, evaluation over a
//! manifest, coordinate-descent training of `(c, beta2)`, and report
//! rendering against the bundled published error rates.

use std::path::{Path, PathBuf};
use std::time::Instant;

use once_cell::sync::Lazy;

use crate::error::{Error, Result};
use crate::image::SegmentationMask;
use crate::io::{load_grayscale, load_mask};
use crate::segment::{segment, MorphologyConfig};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!(
                "split must be 'train' or 'test', got '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub mask: PathBuf,
    pub split: Split,
}

/// Explicit dataset listing: a CSV with columns
/// `image_path,mask_path,split`. Paths are resolved relative to the
/// manifest's directory; every referenced file must exist at load time.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub name: String,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>, name: impl Into<String>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Config(format!("cannot read manifest {}: {e}", path.display())))?;
        let mut entries = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record
                .map_err(|e| Error::Config(format!("manifest row {}: {e}", i + 2)))?;
            if record.len() != 3 {
                return Err(Error::Config(format!(
                    "manifest row {}: expected 3 columns (image_path,mask_path,split), got {}",
                    i + 2,
                    record.len()
                )));
            }
            let resolve = |s: &str| -> PathBuf {
                let p = Path::new(s);
                if p.is_absolute() {
                    p.to_path_buf()
                } else {
                    base.join(p)
                }
            };
            let entry = ManifestEntry {
                image: resolve(&record[0]),
                mask: resolve(&record[1]),
                split: record[2].parse()?,
            };
            for f in [&entry.image, &entry.mask] {
                if !f.is_file() {
                    return Err(Error::Config(format!(
                        "manifest row {}: file not found: {}",
                        i + 2,
                        f.display()
                    )));
                }
            }
            entries.push(entry);
        }
        Ok(Self {
            name: name.into(),
            entries,
        })
    }

    pub fn count(&self, split: Split) -> usize {
        self.entries.iter().filter(|e| e.split == split).count()
    }
}

/// Misclassified-pixel metric: `m_f` foreground pixels estimated as
/// background, `m_b` the converse, `err = (m_f + m_b) / (N1 * N2)`.
pub fn segmentation_error(
    estimated: &SegmentationMask,
    truth: &SegmentationMask,
) -> Result<(f64, usize, usize)> {
    if estimated.height() != truth.height() || estimated.width() != truth.width() {
        return Err(Error::DimensionMismatch(format!(
            "estimated {}x{} vs truth {}x{}",
            estimated.height(),
            estimated.width(),
            truth.height(),
            truth.width()
        )));
    }
    let mut m_f = 0usize;
    let mut m_b = 0usize;
    for (&e, &t) in estimated.data().iter().zip(truth.data()) {
        match (t, e) {
            (1, 0) => m_f += 1,
            (0, 1) => m_b += 1,
            _ => {}
        }
    }
    let err = (m_f + m_b) as f64 / estimated.data().len() as f64;
    Ok((err, m_f, m_b))
}

#[derive(Debug, Clone)]
pub struct ImageResult {
    pub path: String,
    pub err: f64,
    pub m_f: usize,
    pub m_b: usize,
    pub millis: f64,
}

/// Aggregated evaluation of one database split.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub name: String,
    pub split: Split,
    /// Successful per-image results, in manifest order.
    pub results: Vec<ImageResult>,
    /// Failed images with their error messages, in manifest order.
    pub failures: Vec<(String, String)>,
    /// Set when the mean ground-truth foreground fraction falls outside
    /// [0.05, 0.95], which usually indicates inverted mask polarity.
    pub polarity_warning: bool,
    pub solver_cfg: SolverConfig,
    pub morph_cfg: MorphologyConfig,
}

impl EvalReport {
    pub fn mean_err_pct(&self) -> Option<f64> {
        if self.results.is_empty() {
            None
        } else {
            Some(100.0 * self.results.iter().map(|r| r.err).sum::<f64>() / self.results.len() as f64)
        }
    }

    pub fn median_err_pct(&self) -> Option<f64> {
        if self.results.is_empty() {
            return None;
        }
        let mut errs: Vec<f64> = self.results.iter().map(|r| r.err).collect();
        let mid = (errs.len() - 1) / 2;
        errs.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).expect("finite"));
        Some(100.0 * errs[mid])
    }

    pub fn max_err_pct(&self) -> Option<f64> {
        self.results
            .iter()
            .map(|r| r.err)
            .fold(None, |m, e| Some(m.map_or(e, |m: f64| m.max(e))))
            .map(|e| 100.0 * e)
    }

    /// Summary CSV: `db,n_images,mean_err_pct,median_err_pct,max_err_pct,failures`.
    pub fn summary_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
        format!(
            "db,n_images,mean_err_pct,median_err_pct,max_err_pct,failures\n{},{},{},{},{},{}\n",
            self.name,
            self.results.len(),
            fmt(self.mean_err_pct()),
            fmt(self.median_err_pct()),
            fmt(self.max_err_pct()),
            self.failures.len()
        )
    }

    /// Per-image CSV: `path,err,m_f,m_b,ms`. Timing is zeroed unless
    /// requested so that reruns are byte-identical.
    pub fn per_image_csv(&self, include_timing: bool) -> String {
        let mut out = String::from("path,err,m_f,m_b,ms\n");
        for r in &self.results {
            let ms = if include_timing { r.millis } else { 0.0 };
            out.push_str(&format!(
                "{},{:.8},{},{},{:.3}\n",
                r.path, r.err, r.m_f, r.m_b, ms
            ));
        }
        for (path, reason) in &self.failures {
            out.push_str(&format!("{},failed: {},,,\n", path, reason.replace(',', ";")));
        }
        out
    }
}

/// Runs the segmentation pipeline over every manifest entry of `split`.
/// Images are independent and processed by a bounded worker pool
/// (`threads == 0` uses the available parallelism); aggregation is in
/// manifest order regardless of completion order. Per-image failures are
/// recorded, not fatal.
pub fn evaluate(
    manifest: &DatasetManifest,
    split: Split,
    solver_cfg: &SolverConfig,
    morph_cfg: &MorphologyConfig,
    threads: usize,
    progress: bool,
) -> Result<EvalReport> {
    solver_cfg.validate()?;
    morph_cfg.validate()?;
    let entries: Vec<&ManifestEntry> = manifest
        .entries
        .iter()
        .filter(|e| e.split == split)
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;

    let run_one = |entry: &ManifestEntry| -> std::result::Result<(ImageResult, f64), String> {
        let start = Instant::now();
        let image = load_grayscale(&entry.image).map_err(|e| e.to_string())?;
        let truth = load_mask(&entry.mask).map_err(|e| e.to_string())?;
        let (mask, _, _) = segment(&image, solver_cfg, morph_cfg).map_err(|e| e.to_string())?;
        let (err, m_f, m_b) = segmentation_error(&mask, &truth).map_err(|e| e.to_string())?;
        let result = ImageResult {
            path: entry.image.display().to_string(),
            err,
            m_f,
            m_b,
            millis: start.elapsed().as_secs_f64() * 1e3,
        };
        if progress {
            eprintln!("{}  err {:.4}%", result.path, 100.0 * err);
        }
        Ok((result, truth.foreground_fraction()))
    };

    let outcomes: Vec<std::result::Result<(ImageResult, f64), String>> = pool.install(|| {
        use rayon::prelude::*;
        entries.par_iter().map(|e| run_one(e)).collect()
    });

    let mut results = Vec::new();
    let mut failures = Vec::new();
    let mut fg_fractions = Vec::new();
    for (entry, outcome) in entries.iter().zip(outcomes) {
        match outcome {
            Ok((r, fg)) => {
                results.push(r);
                fg_fractions.push(fg);
            }
            Err(reason) => failures.push((entry.image.display().to_string(), reason)),
        }
    }
    let polarity_warning = if fg_fractions.is_empty() {
        false
    } else {
        let mean = fg_fractions.iter().sum::<f64>() / fg_fractions.len() as f64;
        !(0.05..=0.95).contains(&mean)
    };
    if polarity_warning {
        eprintln!(
            "warning: mean ground-truth foreground fraction outside [0.05, 0.95]; check mask polarity (255 = foreground)"
        );
    }
    Ok(EvalReport {
        name: manifest.name.clone(),
        split,
        results,
        failures,
        polarity_warning,
        solver_cfg: solver_cfg.clone(),
        morph_cfg: morph_cfg.clone(),
    })
}

/// One evaluated training point.
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub c: f64,
    pub beta2: f64,
    /// 1 = sweep of c, 2 = sweep of beta2, 0 = full grid.
    pub phase: u8,
    pub mean_err_pct: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub best_c: f64,
    pub best_beta2: f64,
    /// Every evaluated point, for audit.
    pub surface: Vec<GridPoint>,
}

/// Two-phase coordinate search on the train split: sweep `c` with `beta2`
/// fixed at its base value, fix the argmin, then sweep `beta2`. Ties break
/// toward the smaller parameter. With `full_grid` the whole Cartesian
/// product is evaluated instead and the global minimum returned.
pub fn train_grid(
    manifest: &DatasetManifest,
    grid_c: &[f64],
    grid_beta2: &[f64],
    base_cfg: &SolverConfig,
    morph_cfg: &MorphologyConfig,
    full_grid: bool,
    threads: usize,
    progress: bool,
) -> Result<TrainResult> {
    if grid_c.is_empty() || grid_beta2.is_empty() {
        return Err(Error::InvalidArgument("parameter grids must be nonempty".into()));
    }
    if manifest.count(Split::Train) == 0 {
        return Err(Error::InvalidArgument("manifest has no train entries".into()));
    }
    let mut grid_c = grid_c.to_vec();
    let mut grid_beta2 = grid_beta2.to_vec();
    grid_c.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    grid_beta2.sort_by(|a, b| a.partial_cmp(b).expect("finite"));

    let eval_point = |c: f64, beta2: f64, phase: u8| -> Result<GridPoint> {
        let cfg = SolverConfig { c, beta2, ..base_cfg.clone() };
        let report = evaluate(manifest, Split::Train, &cfg, morph_cfg, threads, progress)?;
        if progress {
            eprintln!(
                "grid point c={c} beta2={beta2}: mean err {:?}",
                report.mean_err_pct()
            );
        }
        Ok(GridPoint { c, beta2, phase, mean_err_pct: report.mean_err_pct() })
    };

    // Returns the argmin by mean error; points without a mean (all images
    // failed) never win. Iteration order is ascending, and strict
    // improvement is required, so ties resolve to the smaller value.
    fn argmin(points: &[GridPoint]) -> Option<&GridPoint> {
        let mut best: Option<&GridPoint> = None;
        for p in points {
            let Some(err) = p.mean_err_pct else { continue };
            if best.and_then(|b| b.mean_err_pct).map_or(true, |b| err < b) {
                best = Some(p);
            }
        }
        best
    }

    let mut surface = Vec::new();
    if full_grid {
        for &c in &grid_c {
            for &b2 in &grid_beta2 {
                surface.push(eval_point(c, b2, 0)?);
            }
        }
        let best = argmin(&surface)
            .ok_or_else(|| Error::InvalidArgument("every grid point failed to evaluate".into()))?;
        return Ok(TrainResult {
            best_c: best.c,
            best_beta2: best.beta2,
            surface,
        });
    }

    for &c in &grid_c {
        surface.push(eval_point(c, base_cfg.beta2, 1)?);
    }
    let best_c = argmin(&surface)
        .ok_or_else(|| Error::InvalidArgument("every c grid point failed to evaluate".into()))?
        .c;

    let mut phase2 = Vec::new();
    for &b2 in &grid_beta2 {
        phase2.push(eval_point(best_c, b2, 2)?);
    }
    let best_beta2 = argmin(&phase2)
        .ok_or_else(|| Error::InvalidArgument("every beta2 grid point failed to evaluate".into()))?
        .beta2;
    surface.extend(phase2);

    Ok(TrainResult { best_c, best_beta2, surface })
}

/// Published per-database reference error rates (percent misclassified
/// pixels) for the five prior methods and the decomposition method, used as
/// echo columns in reports. Never recomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRow {
    pub fvc: String,
    pub db: String,
    pub gfb: f64,
    pub hcr: f64,
    pub mvc: f64,
    pub stft: f64,
    pub fdb: f64,
    pub g3pd: f64,
}

impl ReferenceRow {
    /// Key like `FVC2000_DB1`; the average row has key `Avg`.
    pub fn key(&self) -> String {
        if self.db.is_empty() {
            self.fvc.clone()
        } else {
            format!("FVC{}_DB{}", self.fvc, self.db)
        }
    }
}

static REFERENCE_RATES: Lazy<Vec<ReferenceRow>> = Lazy::new(|| {
    let text = include_str!("../assets/reference_error_rates.csv");
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            continue;
        }
        rows.push(ReferenceRow {
            fvc: f[0].to_string(),
            db: f[1].to_string(),
            gfb: f[2].parse().expect("bundled table"),
            hcr: f[3].parse().expect("bundled table"),
            mvc: f[4].parse().expect("bundled table"),
            stft: f[5].parse().expect("bundled table"),
            fdb: f[6].parse().expect("bundled table"),
            g3pd: f[7].parse().expect("bundled table"),
        });
    }
    rows
});

/// Trained `(c, beta2)` per database, bundled alongside the reference
/// error rates.
static TRAINED_PARAMS: Lazy<Vec<(String, f64, f64)>> = Lazy::new(|| {
    let text = include_str!("../assets/trained_params.csv");
    text.lines()
        .skip(1)
        .filter_map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return None;
            }
            Some((
                format!("FVC{}_DB{}", f[0], f[1]),
                f[2].parse().ok()?,
                f[3].parse().ok()?,
            ))
        })
        .collect()
});

pub fn reference_rates() -> &'static [ReferenceRow] {
    &REFERENCE_RATES
}

/// Looks up `(c, beta2)` for a database key like `FVC2002_DB3`.
pub fn trained_params(db_key: &str) -> Option<(f64, f64)> {
    TRAINED_PARAMS
        .iter()
        .find(|(k, _, _)| k == db_key)
        .map(|&(_, c, b2)| (c, b2))
}

/// Renders per-database rows plus the average row: the five prior methods
/// and the published decomposition numbers are echoed from the bundled
/// table; only the `measured` column comes from this run. Reports are
/// matched to reference rows by name; unmatched reports still get a row.
pub fn report_table(reports: &[EvalReport], baselines: &[ReferenceRow]) -> (String, String) {
    let header = [
        "db", "gfb", "hcr", "mvc", "stft", "fdb", "g3pd_published", "measured",
    ];
    let fmt_opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.2}"));

    let mut rows: Vec<Vec<String>> = Vec::new();
    for row in baselines.iter().filter(|r| !r.db.is_empty()) {
        let measured = reports
            .iter()
            .find(|rep| rep.name.eq_ignore_ascii_case(&row.key()))
            .and_then(|rep| rep.mean_err_pct());
        rows.push(vec![
            row.key(),
            format!("{:.2}", row.gfb),
            format!("{:.2}", row.hcr),
            format!("{:.2}", row.mvc),
            format!("{:.2}", row.stft),
            format!("{:.2}", row.fdb),
            format!("{:.2}", row.g3pd),
            fmt_opt(measured),
        ]);
    }
    for rep in reports {
        let known = baselines
            .iter()
            .any(|r| !r.db.is_empty() && rep.name.eq_ignore_ascii_case(&r.key()));
        if !known {
            rows.push(vec![
                rep.name.clone(),
                "-".into(),
                "-".into(),
                "-".into(),
                "-".into(),
                "-".into(),
                "-".into(),
                fmt_opt(rep.mean_err_pct()),
            ]);
        }
    }
    // Average row: published averages echoed verbatim, measured averaged
    // over the reports that produced a mean.
    if let Some(avg) = baselines.iter().find(|r| r.db.is_empty()) {
        let means: Vec<f64> = reports.iter().filter_map(|r| r.mean_err_pct()).collect();
        let measured_avg = if means.is_empty() {
            None
        } else {
            Some(means.iter().sum::<f64>() / means.len() as f64)
        };
        rows.push(vec![
            "Avg".into(),
            format!("{:.2}", avg.gfb),
            format!("{:.2}", avg.hcr),
            format!("{:.2}", avg.mvc),
            format!("{:.2}", avg.stft),
            format!("{:.2}", avg.fdb),
            format!("{:.2}", avg.g3pd),
            fmt_opt(measured_avg),
        ]);
    }

    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut text = String::new();
    let push_row = |cells: &[String], text: &mut String| {
        let line: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{:>width$}", c, width = widths[i]))
            .collect();
        text.push_str(&line.join("  "));
        text.push('\n');
    };
    push_row(
        &header.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        &mut text,
    );
    for row in &rows {
        push_row(row, &mut text);
    }

    let mut csv = header.join(",");
    csv.push('\n');
    for row in &rows {
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    (text, csv)
}
