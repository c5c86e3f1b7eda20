//! Plain-text file formats.
//!
//! * Datasets: one example per line, fields split by a delimiter, numeric
//!   features, the label in a configurable column (last by default). A first
//!   line whose feature fields are not all numeric is taken as a header.
//!   Integer labels map to `1..=m` in ascending order; any other labels map
//!   in order of first appearance. Saved datasets put the label last and
//!   write features with 17 significant digits.
//! * Projections: a header line `d l gamma k`, then `d` rows of `l` values.
//!   Transfer projections append `alpha` to the header, baselines append
//!   their method name.
//! * Feature masks: one line of kept original column indices.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ldg_core::data::FeatureMask;
use ldg_core::{LabeledDataset, Matrix, Method, Projection};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Core(#[from] ldg_core::Error),
}

pub type Result<T, E = IoError> = std::result::Result<T, E>;

/// Which field holds the class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelColumn {
    First,
    #[default]
    Last,
    /// Zero-based field index.
    Index(usize),
}

impl FromStr for LabelColumn {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "first" => Ok(LabelColumn::First),
            "last" => Ok(LabelColumn::Last),
            other => other
                .parse()
                .map(LabelColumn::Index)
                .map_err(|_| format!("expected `first`, `last` or a column index, got `{other}`")),
        }
    }
}

impl std::fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LabelColumn::First => f.write_str("first"),
            LabelColumn::Last => f.write_str("last"),
            LabelColumn::Index(i) => write!(f, "{i}"),
        }
    }
}

impl LabelColumn {
    fn resolve(self, fields: usize) -> Option<usize> {
        match self {
            LabelColumn::First => Some(0),
            LabelColumn::Last => fields.checked_sub(1),
            LabelColumn::Index(i) => (i < fields).then_some(i),
        }
    }
}

/// Parses a `--delimiter` value: a single character, or `tab` / `\t`.
pub fn parse_delimiter(s: &str) -> std::result::Result<char, String> {
    match s {
        "tab" | "\\t" | "\t" => Ok('\t'),
        "space" | " " => Ok(' '),
        _ => {
            let mut chars = s.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => Ok(c),
                _ => Err(format!("delimiter must be a single character, got `{s}`")),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub dataset: LabeledDataset,
    /// Original label text of class `j` at index `j - 1`.
    pub class_names: Vec<String>,
    pub header: Option<Vec<String>>,
}

fn split_fields(line: &str, delimiter: char) -> Vec<&str> {
    if delimiter == ' ' {
        line.split_whitespace().collect()
    } else {
        line.split(delimiter).map(str::trim).collect()
    }
}

/// Parses dataset text. `origin` only labels error messages.
pub fn parse_dataset(text: &str, delimiter: char, label: LabelColumn, origin: &Path) -> Result<LoadedDataset> {
    let parse_err = |line: usize, column: usize, message: String| IoError::Parse {
        path: origin.to_path_buf(),
        line,
        column,
        message,
    };

    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
        .peekable();

    let (first_no, first_line) = *lines.peek().ok_or_else(|| parse_err(1, 1, "file is empty".into()))?;
    let width = split_fields(first_line, delimiter).len();
    let label_at = label.resolve(width).ok_or_else(|| {
        parse_err(
            first_no,
            1,
            format!("label column {label} out of range for {width} fields"),
        )
    })?;
    if width < 2 {
        return Err(parse_err(first_no, 1, "need at least one feature and a label".into()));
    }

    let first_fields = split_fields(first_line, delimiter);
    let is_header = first_fields
        .iter()
        .enumerate()
        .any(|(c, f)| c != label_at && f.parse::<f64>().is_err());
    let header = if is_header {
        lines.next();
        Some(first_fields.iter().map(|s| s.to_string()).collect())
    } else {
        None
    };

    let mut features = Vec::new();
    let mut raw_labels = Vec::new();
    for (line_no, line) in lines {
        let fields = split_fields(line, delimiter);
        if fields.len() != width {
            return Err(parse_err(
                line_no,
                fields.len().min(width) + 1,
                format!("expected {width} fields, found {}", fields.len()),
            ));
        }
        for (c, f) in fields.iter().enumerate() {
            if c == label_at {
                raw_labels.push(f.to_string());
                continue;
            }
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(line_no, c + 1, format!("non-numeric feature `{f}`")))?;
            if !v.is_finite() {
                return Err(parse_err(line_no, c + 1, format!("non-finite feature `{f}`")));
            }
            features.push(v);
        }
    }
    if raw_labels.is_empty() {
        return Err(parse_err(first_no, 1, "no data rows".into()));
    }

    let (labels, class_names) = map_labels(&raw_labels);
    let n = raw_labels.len();
    let matrix = Matrix::from_vec(n, width - 1, features)?;
    let dataset = LabeledDataset::new(matrix, labels, class_names.len())?;
    Ok(LoadedDataset {
        dataset,
        class_names,
        header,
    })
}

fn map_labels(raw: &[String]) -> (Vec<usize>, Vec<String>) {
    let ints: Option<Vec<i64>> = raw.iter().map(|s| s.parse::<i64>().ok()).collect();
    if let Some(ints) = ints {
        let mut distinct = ints.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let labels = ints
            .iter()
            .map(|v| distinct.binary_search(v).expect("present") + 1)
            .collect();
        return (labels, distinct.iter().map(|v| v.to_string()).collect());
    }
    let mut names: Vec<String> = Vec::new();
    let labels = raw
        .iter()
        .map(|s| match names.iter().position(|n| n == s) {
            Some(p) => p + 1,
            None => {
                names.push(s.clone());
                names.len()
            }
        })
        .collect();
    (labels, names)
}

pub fn load_dataset(path: &Path, delimiter: char, label: LabelColumn) -> Result<LoadedDataset> {
    let text = fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dataset(&text, delimiter, label, path)
}

/// Dataset text with the label last and 17 significant digits per feature.
pub fn format_dataset(dataset: &LabeledDataset, delimiter: char) -> String {
    let mut out = String::new();
    for i in 0..dataset.len() {
        for v in dataset.row(i) {
            let _ = write!(out, "{v:.16e}{delimiter}");
        }
        let _ = writeln!(out, "{}", dataset.label(i));
    }
    out
}

pub fn save_dataset(path: &Path, dataset: &LabeledDataset, delimiter: char) -> Result<()> {
    write_file(path, format_dataset(dataset, delimiter).as_bytes())
}

/// Re-labels `target` into the class universe of `source` by class name.
/// Every target class must exist in the source.
pub fn align_classes(source: &LoadedDataset, target: &LoadedDataset) -> Result<LabeledDataset> {
    let mut labels = Vec::with_capacity(target.dataset.len());
    for &y in target.dataset.labels() {
        let name = &target.class_names[y - 1];
        let j = source.class_names.iter().position(|n| n == name).ok_or_else(|| {
            ldg_core::Error::Capability(format!("target class `{name}` does not occur in the source data"))
        })?;
        labels.push(j + 1);
    }
    Ok(LabeledDataset::with_class_count(
        target.dataset.features().clone(),
        labels,
        source.class_names.len(),
    )?)
}

pub fn format_projection(p: &Projection) -> String {
    let mut out = String::new();
    let _ = write!(out, "{} {} {} {}", p.input_dim(), p.output_dim(), p.gamma(), p.k());
    match p.method() {
        Method::Ldg => {}
        Method::TransferLdg => {
            let _ = write!(out, " {}", p.alpha().unwrap_or(0.0));
        }
        m @ (Method::Pca | Method::Fda) => {
            let _ = write!(out, " {m}");
        }
    }
    out.push('\n');
    let b = p.basis();
    for r in 0..b.rows() {
        let row: Vec<String> = b.row(r).iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Parses a projection file. The file does not carry eigenvalues; they are
/// returned as NaN.
pub fn parse_projection(text: &str, origin: &Path) -> Result<Projection> {
    let parse_err = |line: usize, column: usize, message: String| IoError::Parse {
        path: origin.to_path_buf(),
        line,
        column,
        message,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, 1, "empty projection file".into()))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() < 4 || tokens.len() > 5 {
        return Err(parse_err(1, 1, "header must be `d l gamma k [alpha|method]`".into()));
    }
    let d: usize = tokens[0].parse().map_err(|_| parse_err(1, 1, "bad d".into()))?;
    let l: usize = tokens[1].parse().map_err(|_| parse_err(1, 2, "bad l".into()))?;
    let gamma: f64 = tokens[2].parse().map_err(|_| parse_err(1, 3, "bad gamma".into()))?;
    let k: usize = tokens[3].parse().map_err(|_| parse_err(1, 4, "bad k".into()))?;
    let (method, alpha) = match tokens.get(4) {
        None => (Method::Ldg, None),
        Some(t) => match t.parse::<f64>() {
            Ok(a) => (Method::TransferLdg, Some(a)),
            Err(_) => (t.parse::<Method>()?, None),
        },
    };
    let mut data = Vec::with_capacity(d * l);
    let mut rows = 0;
    for (i, line) in lines {
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() != l {
            return Err(parse_err(
                i + 1,
                1,
                format!("expected {l} values, found {}", vals.len()),
            ));
        }
        for (c, v) in vals.iter().enumerate() {
            data.push(
                v.parse::<f64>()
                    .map_err(|_| parse_err(i + 1, c + 1, format!("bad value `{v}`")))?,
            );
        }
        rows += 1;
    }
    if rows != d {
        return Err(parse_err(1, 1, format!("header says {d} rows, found {rows}")));
    }
    let basis = Matrix::from_vec(d, l, data)?;
    let mut p = Projection::new(basis, vec![f64::NAN; l], method)?
        .with_gamma(gamma)
        .with_k(k);
    if let Some(a) = alpha {
        p = p.with_alpha(a);
    }
    Ok(p)
}

pub fn save_projection(path: &Path, p: &Projection) -> Result<()> {
    write_file(path, format_projection(p).as_bytes())
}

pub fn load_projection(path: &Path) -> Result<Projection> {
    let text = fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })?;
    parse_projection(&text, path)
}

pub fn format_mask(mask: &FeatureMask) -> String {
    let idx: Vec<String> = mask.kept.iter().map(|i| i.to_string()).collect();
    let mut s = idx.join(" ");
    s.push('\n');
    s
}

pub fn parse_mask(text: &str, original_dim: usize) -> std::result::Result<FeatureMask, String> {
    let kept = text
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| format!("bad column index `{t}`")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if let Some(bad) = kept.iter().find(|&&i| i >= original_dim) {
        return Err(format!("column {bad} outside 0..{original_dim}"));
    }
    Ok(FeatureMask { original_dim, kept })
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::File::create(path)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(|source| IoError::File {
            path: path.to_path_buf(),
            source,
        })
}
