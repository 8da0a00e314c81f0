//! On-disk output bundle.
//!
//! A bundle directory holds:
//!
//! | file                  | columns / content                                                       |
//! |-----------------------|-------------------------------------------------------------------------|
//! | `manifest.json`       | format and tool version, seed, counts, validated config, rerank info   |
//! | `recommendations.csv` | `user_id,regime_id,item_id,rank,raw_score,biased_score,normalized_score,in_top_l` |
//! | `items.csv`           | `item_id,flag_0..flag_{s-1}`                                           |
//! | `users.csv`           | `user_id,regime_id`                                                    |
//! | `user_factors.csv`    | `id,f_0..f_{k-1}` (only with `emit_factors`)                           |
//! | `item_factors.csv`    | `id,f_0..f_{k-1}` (only with `emit_factors`)                           |
//! | `metrics.json`        | the [`MetricsReport`] computed at write time                            |
//!
//! Reals are rendered in Rust's shortest round-trip form, so reading a
//! bundle recovers every score bit-for-bit. `rank` is 1-based and
//! `in_top_l` is `1` or `0`. Each file is written to a temporary name and
//! renamed into place.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::config::{validate_config, ExperimentConfig};
use crate::factors::FactorMatrices;
use crate::metrics::{compute_report, MetricsError, MetricsReport};
use crate::pipeline::Generation;
use crate::propensity::ProtectedItems;
use crate::reclist::{RecommendationList, ScoredItem};

pub const FORMAT_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECOMMENDATIONS_FILE: &str = "recommendations.csv";
pub const ITEMS_FILE: &str = "items.csv";
pub const USERS_FILE: &str = "users.csv";
pub const USER_FACTORS_FILE: &str = "user_factors.csv";
pub const ITEM_FACTORS_FILE: &str = "item_factors.csv";
pub const METRICS_FILE: &str = "metrics.json";

const RECOMMENDATIONS_HEADER: &str =
    "user_id,regime_id,item_id,rank,raw_score,biased_score,normalized_score,in_top_l";

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: line {line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{}: {message}", path.display())]
    Inconsistent { path: PathBuf, message: String },
    #[error("manifest seed {found} does not match expected seed {expected}")]
    SeedMismatch { expected: u64, found: u64 },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Parameters of the re-ranking that produced a bundle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RerankInfo {
    pub lambda: f64,
    pub feature: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub tool_version: String,
    pub seed: u64,
    pub n_users: usize,
    pub n_items: usize,
    pub recommendation_rows: usize,
    pub factors_included: bool,
    pub rerank: Option<RerankInfo>,
    pub config: ExperimentConfig,
}

/// The in-memory content of a bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub config: ExperimentConfig,
    pub protected: ProtectedItems,
    pub regime_of_user: Vec<usize>,
    pub lists: Vec<RecommendationList>,
    pub factors: Option<FactorMatrices>,
    pub rerank: Option<RerankInfo>,
}

impl Bundle {
    pub fn from_generation(generation: &Generation) -> Self {
        Self {
            config: generation.config.clone(),
            protected: generation.protected(),
            regime_of_user: generation.regime_of_user().to_vec(),
            lists: generation.lists.clone(),
            factors: generation
                .config
                .emit_factors
                .then(|| generation.factors.clone()),
            rerank: None,
        }
    }

    pub fn report(&self) -> Result<MetricsReport, MetricsError> {
        compute_report(&self.lists, &self.protected, self.config.regimes.len())
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            format_version: FORMAT_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            seed: self.config.seed,
            n_users: self.regime_of_user.len(),
            n_items: self.config.n_items,
            recommendation_rows: self.lists.iter().map(|l| l.entries.len()).sum(),
            factors_included: self.factors.is_some(),
            rerank: self.rerank,
            config: self.config.clone(),
        }
    }
}

/// Re-ranks every list of a candidate-pool bundle with
/// [`greedy_fair_rerank`](crate::metrics::greedy_fair_rerank). The result is
/// a top-l bundle carrying the re-ranking parameters.
pub fn rerank_bundle(bundle: &Bundle, lambda: f64, feature: usize) -> Result<Bundle, MetricsError> {
    if feature >= bundle.config.s_sensitive {
        return Err(MetricsError::FeatureOutOfRange {
            feature,
            sensitive: bundle.config.s_sensitive,
        });
    }
    let lists = bundle
        .lists
        .iter()
        .map(|l| crate::metrics::greedy_fair_rerank(l, lambda, feature))
        .collect::<Result<Vec<_>, _>>()?;
    let mut config = bundle.config.clone();
    config.emit_candidates = false;
    Ok(Bundle {
        config,
        protected: bundle.protected.clone(),
        regime_of_user: bundle.regime_of_user.clone(),
        lists,
        factors: bundle.factors.clone(),
        rerank: Some(RerankInfo { lambda, feature }),
    })
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> BundleError + '_ {
    move |source| BundleError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<(), BundleError> {
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    fs::rename(&tmp, &target).map_err(io_err(&target))
}

fn fmt_real(x: f64) -> String {
    format!("{x:?}")
}

fn render_recommendations(lists: &[RecommendationList]) -> String {
    let mut out = String::from(RECOMMENDATIONS_HEADER);
    out.push('\n');
    for list in lists {
        for (i, e) in list.entries.iter().enumerate() {
            let normalized = e.normalized_score.expect("bundle lists are normalized");
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                list.user_id,
                list.regime_id,
                e.item_id,
                i + 1,
                fmt_real(e.raw_score),
                fmt_real(e.biased_score),
                fmt_real(normalized),
                u8::from(i < list.list_size)
            )
            .unwrap();
        }
    }
    out
}

fn render_items(protected: &ProtectedItems) -> String {
    let mut out = String::from("item_id");
    for j in 0..protected.n_features() {
        write!(out, ",flag_{j}").unwrap();
    }
    out.push('\n');
    for (i, row) in protected.flags.rows().into_iter().enumerate() {
        write!(out, "{i}").unwrap();
        for f in row {
            write!(out, ",{f}").unwrap();
        }
        out.push('\n');
    }
    out
}

fn render_users(regime_of_user: &[usize]) -> String {
    let mut out = String::from("user_id,regime_id\n");
    for (u, r) in regime_of_user.iter().enumerate() {
        writeln!(out, "{u},{r}").unwrap();
    }
    out
}

fn render_factors(m: &Array2<f64>) -> String {
    let mut out = String::from("id");
    for j in 0..m.ncols() {
        write!(out, ",f_{j}").unwrap();
    }
    out.push('\n');
    for (i, row) in m.rows().into_iter().enumerate() {
        write!(out, "{i}").unwrap();
        for x in row {
            write!(out, ",{}", fmt_real(*x)).unwrap();
        }
        out.push('\n');
    }
    out
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Writes every bundle file into `dir` (created if missing) and returns the
/// metrics report that was stored alongside.
pub fn write_bundle(bundle: &Bundle, dir: &Path) -> Result<MetricsReport, BundleError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let report = bundle.report()?;
    write_atomic(
        dir,
        RECOMMENDATIONS_FILE,
        &render_recommendations(&bundle.lists),
    )?;
    write_atomic(dir, ITEMS_FILE, &render_items(&bundle.protected))?;
    write_atomic(dir, USERS_FILE, &render_users(&bundle.regime_of_user))?;
    if let Some(f) = &bundle.factors {
        write_atomic(dir, USER_FACTORS_FILE, &render_factors(&f.user_factors))?;
        write_atomic(dir, ITEM_FACTORS_FILE, &render_factors(&f.item_factors))?;
    }
    write_atomic(dir, METRICS_FILE, &to_json(&report))?;
    // Manifest last: its presence marks a complete bundle.
    write_atomic(dir, MANIFEST_FILE, &to_json(&bundle.manifest()))?;
    Ok(report)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, BundleError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| BundleError::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

struct Table {
    path: PathBuf,
    rows: Vec<(u64, csv::StringRecord)>,
}

fn read_table(path: &Path, expected_header: &[String]) -> Result<Table, BundleError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let parse_err = |line: u64, message: String| BundleError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let header = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if header.iter().ne(expected_header.iter().map(String::as_str)) {
        return Err(parse_err(
            1,
            format!("expected header `{}`", expected_header.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push((line, record));
    }
    Ok(Table {
        path: path.to_path_buf(),
        rows,
    })
}

impl Table {
    fn field<T: std::str::FromStr>(&self, row: usize, col: usize) -> Result<T, BundleError>
    where
        T::Err: std::fmt::Display,
    {
        let (line, rec) = &self.rows[row];
        let raw = rec.get(col).unwrap_or("");
        raw.parse().map_err(|e| BundleError::Parse {
            path: self.path.clone(),
            line: *line,
            message: format!("column {col}: cannot parse `{raw}`: {e}"),
        })
    }

    fn bad(&self, row: usize, message: impl Into<String>) -> BundleError {
        BundleError::Parse {
            path: self.path.clone(),
            line: self.rows.get(row).map_or(0, |r| r.0),
            message: message.into(),
        }
    }

    fn inconsistent(&self, message: impl Into<String>) -> BundleError {
        BundleError::Inconsistent {
            path: self.path.clone(),
            message: message.into(),
        }
    }
}

fn header(first: &str, prefix: &str, n: usize) -> Vec<String> {
    std::iter::once(first.to_string())
        .chain((0..n).map(|j| format!("{prefix}{j}")))
        .collect()
}

fn read_matrix(path: &Path, rows: usize, cols: usize) -> Result<Array2<f64>, BundleError> {
    let t = read_table(path, &header("id", "f_", cols))?;
    if t.rows.len() != rows {
        return Err(t.inconsistent(format!("expected {rows} rows, found {}", t.rows.len())));
    }
    let mut m = Array2::zeros((rows, cols));
    for r in 0..rows {
        if t.field::<usize>(r, 0)? != r {
            return Err(t.bad(r, format!("expected id {r}")));
        }
        for c in 0..cols {
            m[[r, c]] = t.field(r, c + 1)?;
        }
    }
    Ok(m)
}

/// Reads a bundle directory, validating row counts, identifiers and score
/// ranges against the manifest. With `expect_seed`, the manifest's seed
/// must match.
pub fn read_bundle(dir: &Path, expect_seed: Option<u64>) -> Result<Bundle, BundleError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest: Manifest = read_json(&manifest_path)?;
    let inconsistent = |message: String| BundleError::Inconsistent {
        path: manifest_path.clone(),
        message,
    };
    if manifest.format_version != FORMAT_VERSION {
        return Err(inconsistent(format!(
            "unsupported format_version {}",
            manifest.format_version
        )));
    }
    if let Some(expected) = expect_seed {
        if manifest.seed != expected {
            return Err(BundleError::SeedMismatch {
                expected,
                found: manifest.seed,
            });
        }
    }
    let config =
        validate_config(manifest.config.clone()).map_err(|e| inconsistent(e.to_string()))?;
    if manifest.seed != config.seed {
        return Err(inconsistent("seed differs from config.seed".into()));
    }
    let n_users = config.n_users();
    if manifest.n_users != n_users || manifest.n_items != config.n_items {
        return Err(inconsistent(
            "user or item count differs from config".into(),
        ));
    }
    let s = config.s_sensitive;

    // Items.
    let items = read_table(&dir.join(ITEMS_FILE), &header("item_id", "flag_", s))?;
    if items.rows.len() != config.n_items {
        return Err(items.inconsistent(format!(
            "expected {} rows, found {}",
            config.n_items,
            items.rows.len()
        )));
    }
    let mut flags = Array2::<u8>::zeros((config.n_items, s));
    for i in 0..config.n_items {
        if items.field::<usize>(i, 0)? != i {
            return Err(items.bad(i, format!("expected item_id {i}")));
        }
        for j in 0..s {
            let f: u8 = items.field(i, j + 1)?;
            if f > 1 {
                return Err(items.bad(i, format!("flag_{j} must be 0 or 1")));
            }
            flags[[i, j]] = f;
        }
    }
    let protected = ProtectedItems { flags };

    // Users.
    let users = read_table(
        &dir.join(USERS_FILE),
        &["user_id".to_string(), "regime_id".to_string()],
    )?;
    if users.rows.len() != n_users {
        return Err(users.inconsistent(format!(
            "expected {n_users} rows, found {}",
            users.rows.len()
        )));
    }
    let expected_regimes = crate::propensity::regime_assignment(&config);
    let mut regime_of_user = Vec::with_capacity(n_users);
    for (u, &expected) in expected_regimes.iter().enumerate() {
        if users.field::<usize>(u, 0)? != u {
            return Err(users.bad(u, format!("expected user_id {u}")));
        }
        let r: usize = users.field(u, 1)?;
        if r != expected {
            return Err(users.bad(
                u,
                format!("regime_id {r} disagrees with config ({expected})"),
            ));
        }
        regime_of_user.push(r);
    }

    // Recommendations.
    let columns: Vec<String> = RECOMMENDATIONS_HEADER
        .split(',')
        .map(String::from)
        .collect();
    let recs = read_table(&dir.join(RECOMMENDATIONS_FILE), &columns)?;
    let per_list = config.retained_per_list();
    let expected_rows = n_users * per_list;
    if recs.rows.len() != expected_rows || manifest.recommendation_rows != expected_rows {
        return Err(recs.inconsistent(format!(
            "expected {expected_rows} rows, found {}",
            recs.rows.len()
        )));
    }
    let (lo, hi) = config.norm_range;
    let mut lists = Vec::with_capacity(n_users);
    for (u, &user_regime) in regime_of_user.iter().enumerate() {
        let mut entries = Vec::with_capacity(per_list);
        for pos in 0..per_list {
            let row = u * per_list + pos;
            let user: usize = recs.field(row, 0)?;
            let regime: usize = recs.field(row, 1)?;
            let item_id: usize = recs.field(row, 2)?;
            let rank: usize = recs.field(row, 3)?;
            let raw_score: f64 = recs.field(row, 4)?;
            let biased_score: f64 = recs.field(row, 5)?;
            let normalized: f64 = recs.field(row, 6)?;
            let in_top: u8 = recs.field(row, 7)?;
            if user != u || regime != user_regime {
                return Err(recs.bad(row, format!("expected user {u} in regime {user_regime}")));
            }
            if rank != pos + 1 || in_top != u8::from(pos < config.list_size) {
                return Err(recs.bad(row, "rank or in_top_l out of sequence"));
            }
            if item_id >= config.n_items {
                return Err(recs.bad(row, format!("item_id {item_id} out of range")));
            }
            if !(lo..=hi).contains(&normalized) {
                return Err(recs.bad(
                    row,
                    format!("normalized_score {normalized} outside [{lo}, {hi}]"),
                ));
            }
            if entries.iter().any(|e: &ScoredItem| e.item_id == item_id) {
                return Err(recs.bad(row, format!("duplicate item {item_id} in list")));
            }
            entries.push(ScoredItem {
                item_id,
                raw_score,
                bias_penalty_total: raw_score - biased_score,
                biased_score,
                normalized_score: Some(normalized),
                protected_flags: protected.row(item_id),
            });
        }
        lists.push(RecommendationList {
            user_id: u,
            regime_id: user_regime,
            entries,
            list_size: config.list_size,
            candidate_pool: config.emit_candidates,
        });
    }

    let factors = if manifest.factors_included {
        Some(FactorMatrices {
            user_factors: read_matrix(&dir.join(USER_FACTORS_FILE), n_users, config.k_factors)?,
            item_factors: read_matrix(
                &dir.join(ITEM_FACTORS_FILE),
                config.n_items,
                config.k_factors,
            )?,
        })
    } else {
        None
    };

    Ok(Bundle {
        config,
        protected,
        regime_of_user,
        lists,
        factors,
        rerank: manifest.rerank,
    })
}

/// Reads the report stored at generation time.
pub fn read_stored_report(dir: &Path) -> Result<MetricsReport, BundleError> {
    read_json(&dir.join(METRICS_FILE))
}
