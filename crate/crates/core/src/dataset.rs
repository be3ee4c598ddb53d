//! Tabular ingestion: CSV parsing against a declared schema, mean/mode
//! imputation, one-hot encoding and seeded train/test splitting.

use std::collections::HashSet;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{arg_err, FidsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColumnKind {
    Numeric,
    Categorical,
    TargetClass,
    TargetNumeric,
    /// Present in the file but not used (row identifiers and the like).
    Ignored,
}

impl ColumnKind {
    pub fn is_target(self) -> bool {
        matches!(self, ColumnKind::TargetClass | ColumnKind::TargetNumeric)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    /// Ordered category labels; non-empty exactly for categorical columns.
    pub categories: Vec<String>,
    /// Cell token that denotes a missing value, e.g. `?`.
    pub missing_marker: Option<String>,
}

impl ColumnSchema {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Numeric,
            categories: Vec::new(),
            missing_marker: None,
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical,
            categories: categories.into_iter().map(Into::into).collect(),
            missing_marker: None,
        }
    }

    pub fn target_class(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::TargetClass,
            categories: Vec::new(),
            missing_marker: None,
        }
    }

    pub fn target_numeric(name: impl Into<String>) -> Self {
        Self {
            kind: ColumnKind::TargetNumeric,
            ..Self::numeric(name)
        }
    }

    pub fn ignored(name: impl Into<String>) -> Self {
        Self {
            kind: ColumnKind::Ignored,
            ..Self::numeric(name)
        }
    }

    pub fn with_missing_marker(mut self, marker: impl Into<String>) -> Self {
        self.missing_marker = Some(marker.into());
        self
    }

    fn is_missing(&self, field: &str) -> bool {
        field.is_empty() || self.missing_marker.as_deref() == Some(field)
    }
}

/// Checks the schema-level invariants: a single target column, and
/// duplicate-free category lists present exactly on categorical columns.
pub fn validate_schema(schema: &[ColumnSchema]) -> Result<()> {
    let targets = schema.iter().filter(|c| c.kind.is_target()).count();
    if targets != 1 {
        return Err(FidsError::Schema(format!(
            "expected exactly one target column, found {targets}"
        )));
    }
    for col in schema {
        let categorical = col.kind == ColumnKind::Categorical;
        if categorical && col.categories.is_empty() {
            return Err(FidsError::Schema(format!(
                "categorical column `{}` declares no categories",
                col.name
            )));
        }
        if !categorical && !col.categories.is_empty() {
            return Err(FidsError::Schema(format!(
                "column `{}` is not categorical but declares categories",
                col.name
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = col.categories.iter().find(|c| !seen.insert(c.as_str())) {
            return Err(FidsError::Schema(format!(
                "column `{}` lists category `{dup}` twice",
                col.name
            )));
        }
    }
    Ok(())
}

/// Parsed cells before any typing, row-major, with missing cells absent.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    columns: Vec<ColumnSchema>,
    cells: Vec<Option<String>>,
    n_rows: usize,
}

impl RawTable {
    pub fn new(columns: Vec<ColumnSchema>, rows: Vec<Vec<Option<String>>>) -> Result<Self> {
        let n_cols = columns.len();
        let n_rows = rows.len();
        let mut cells = Vec::with_capacity(n_rows * n_cols);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n_cols {
                return Err(FidsError::Parse {
                    row: i,
                    message: format!("expected {n_cols} fields, found {}", row.len()),
                });
            }
            cells.extend(row);
        }
        Ok(Self {
            columns,
            cells,
            n_rows,
        })
    }

    pub fn columns(&self) -> &[ColumnSchema] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<&str> {
        self.cells[row * self.n_cols() + col].as_deref()
    }

    pub fn row(&self, row: usize) -> &[Option<String>] {
        let c = self.n_cols();
        &self.cells[row * c..(row + 1) * c]
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = Option<&str>> + '_ {
        let c = self.n_cols();
        self.cells[col..].iter().step_by(c).map(|v| v.as_deref())
    }

    pub fn count_missing(&self) -> usize {
        self.cells.iter().filter(|c| c.is_none()).count()
    }

    /// Appends the rows of `other`, which must share this table's schema.
    pub fn append(&mut self, other: RawTable) -> Result<()> {
        if other.columns != self.columns {
            return Err(FidsError::Schema(
                "cannot append tables with different schemas".into(),
            ));
        }
        self.cells.extend(other.cells);
        self.n_rows += other.n_rows;
        Ok(())
    }

    /// Applies `f` to every present cell of column `col`.
    pub fn map_column(&mut self, col: usize, mut f: impl FnMut(&str) -> String) {
        let c = self.n_cols();
        for cell in self.cells[col..].iter_mut().step_by(c).flatten() {
            *cell = f(cell);
        }
    }
}

/// Parses comma-separated text. Fields are trimmed, blank lines skipped,
/// and cells equal to the column's missing marker (or empty) become absent.
pub fn parse_csv(text: &str, schema: &[ColumnSchema], has_header: bool) -> Result<RawTable> {
    let n_cols = schema.len();
    let mut rows = Vec::new();
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .peekable();
    if has_header {
        lines.next();
    }
    if lines.peek().is_none() {
        return Err(FidsError::Parse {
            row: 0,
            message: "input contains no data rows".into(),
        });
    }
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != n_cols {
            return Err(FidsError::Parse {
                row: i,
                message: format!("expected {n_cols} fields, found {}", fields.len()),
            });
        }
        rows.push(
            fields
                .into_iter()
                .zip(schema)
                .map(|(f, col)| (!col.is_missing(f)).then(|| f.to_string()))
                .collect(),
        );
    }
    RawTable::new(schema.to_vec(), rows)
}

fn parse_number(col: &ColumnSchema, row: usize, value: &str) -> Result<f64> {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(FidsError::Encoding {
            column: col.name.clone(),
            row,
            value: value.to_string(),
        }),
    }
}

/// Fills absent numeric cells with the column mean of the present values
/// and absent categorical cells with the column mode (first category on
/// ties). Targets and ignored columns are left untouched.
pub fn impute_mean(table: &RawTable) -> Result<RawTable> {
    let mut out = table.clone();
    let n_cols = table.n_cols();
    for (j, col) in table.columns.iter().enumerate() {
        let missing: Vec<usize> = (0..table.n_rows)
            .filter(|&i| table.cell(i, j).is_none())
            .collect();
        if missing.is_empty() {
            continue;
        }
        let fill = match col.kind {
            ColumnKind::Numeric => {
                let mut sum = 0.0;
                let mut count = 0usize;
                for (i, v) in table.column(j).enumerate() {
                    if let Some(v) = v {
                        sum += parse_number(col, i, v)?;
                        count += 1;
                    }
                }
                if count == 0 {
                    return Err(FidsError::Imputation {
                        column: col.name.clone(),
                    });
                }
                (sum / count as f64).to_string()
            }
            ColumnKind::Categorical => {
                let mut counts = vec![0usize; col.categories.len()];
                for v in table.column(j).flatten() {
                    if let Some(pos) = col.categories.iter().position(|c| c == v) {
                        counts[pos] += 1;
                    }
                }
                let (best, &n) = counts
                    .iter()
                    .enumerate()
                    .rev()
                    .max_by_key(|(_, &c)| c)
                    .expect("categorical columns have categories");
                if n == 0 {
                    return Err(FidsError::Imputation {
                        column: col.name.clone(),
                    });
                }
                col.categories[best].clone()
            }
            _ => continue,
        };
        for i in missing {
            out.cells[i * n_cols + j] = Some(fill.clone());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// Class indices into `Dataset::class_labels`.
    Class(Vec<usize>),
    Real(Vec<f64>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Class(v) => v.len(),
            Targets::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, rows: &[usize]) -> Targets {
        match self {
            Targets::Class(v) => Targets::Class(rows.iter().map(|&i| v[i]).collect()),
            Targets::Real(v) => Targets::Real(rows.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// Encoded, fully numeric data: an `n × d` row-major feature matrix plus targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    targets: Targets,
    feature_names: Vec<String>,
    class_labels: Vec<String>,
    n: usize,
    d: usize,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        d: usize,
        targets: Targets,
        feature_names: Vec<String>,
        class_labels: Vec<String>,
    ) -> Result<Self> {
        let n = targets.len();
        if features.len() != n * d {
            return arg_err(format!(
                "feature matrix has {} cells, expected {n} x {d}",
                features.len()
            ));
        }
        if feature_names.len() != d {
            return arg_err(format!("{} feature names for {d} features", feature_names.len()));
        }
        if let Some(bad) = features.iter().position(|v| !v.is_finite()) {
            return arg_err(format!("non-finite feature value at row {}", bad / d.max(1)));
        }
        match &targets {
            Targets::Class(labels) => {
                if let Some(bad) = labels.iter().find(|&&c| c >= class_labels.len()) {
                    return arg_err(format!(
                        "class index {bad} out of range for {} labels",
                        class_labels.len()
                    ));
                }
            }
            Targets::Real(values) => {
                if values.iter().any(|v| !v.is_finite()) {
                    return arg_err("non-finite regression target");
                }
            }
        }
        Ok(Self {
            features,
            targets,
            feature_names,
            class_labels,
            n,
            d,
        })
    }

    /// Classification dataset with generic feature names `x0..x{d-1}`
    /// and class labels `0..n_classes`.
    pub fn from_rows(rows: &[Vec<f64>], labels: &[usize]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return arg_err("rows have differing lengths");
        }
        if rows.len() != labels.len() {
            return arg_err("row count differs from label count");
        }
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        Self::new(
            rows.concat(),
            d,
            Targets::Class(labels.to_vec()),
            (0..d).map(|j| format!("x{j}")).collect(),
            (0..n_classes).map(|c| c.to_string()).collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.n).map(move |i| self.row(i))
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.features[row * self.d + feature]
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    /// Class indices, or `None` for regression data.
    pub fn labels(&self) -> Option<&[usize]> {
        match &self.targets {
            Targets::Class(v) => Some(v),
            Targets::Real(_) => None,
        }
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn n_classes(&self) -> usize {
        self.class_labels.len()
    }

    /// Rows `rows` in the given order.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(rows.len() * self.d);
        for &i in rows {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            features,
            targets: self.targets.select(rows),
            feature_names: self.feature_names.clone(),
            class_labels: self.class_labels.clone(),
            n: rows.len(),
            d: self.d,
        }
    }

    /// Same targets and metadata with a replacement feature matrix of equal shape.
    pub fn with_features(&self, features: Vec<f64>) -> Result<Dataset> {
        if features.len() != self.features.len() {
            return arg_err("replacement feature matrix has a different shape");
        }
        if features.iter().any(|v| !v.is_finite()) {
            return arg_err("non-finite feature value");
        }
        Ok(Dataset {
            features,
            ..self.clone()
        })
    }

    /// Drops the listed feature columns.
    pub fn without_features(&self, drop: &[usize]) -> Dataset {
        let keep: Vec<usize> = (0..self.d).filter(|j| !drop.contains(j)).collect();
        let mut features = Vec::with_capacity(self.n * keep.len());
        for row in self.rows() {
            features.extend(keep.iter().map(|&j| row[j]));
        }
        Dataset {
            features,
            targets: self.targets.clone(),
            feature_names: keep.iter().map(|&j| self.feature_names[j].clone()).collect(),
            class_labels: self.class_labels.clone(),
            n: self.n,
            d: keep.len(),
        }
    }
}

/// Orders class labels numerically when every label is a number, otherwise
/// lexicographically.
fn order_labels(mut labels: Vec<String>) -> Vec<String> {
    let numeric: Option<Vec<f64>> = labels.iter().map(|l| l.parse::<f64>().ok()).collect();
    match numeric {
        Some(_) => labels.sort_by(|a, b| {
            let (x, y) = (a.parse::<f64>().unwrap(), b.parse::<f64>().unwrap());
            x.total_cmp(&y).then_with(|| a.cmp(b))
        }),
        None => labels.sort(),
    }
    labels
}

/// Converts a fully populated table into a numeric dataset. Numeric columns
/// are copied, categorical columns become one indicator column per category
/// (named `column=category`), and class targets are indexed in label order.
pub fn encode(table: &RawTable, schema: &[ColumnSchema]) -> Result<Dataset> {
    validate_schema(schema)?;
    if schema.len() != table.n_cols() {
        return Err(FidsError::Schema(format!(
            "schema has {} columns, table has {}",
            schema.len(),
            table.n_cols()
        )));
    }
    let n = table.n_rows();
    let cell = |i: usize, j: usize| -> Result<&str> {
        table.cell(i, j).ok_or_else(|| FidsError::Encoding {
            column: schema[j].name.clone(),
            row: i,
            value: "<missing>".into(),
        })
    };

    let mut feature_names = Vec::new();
    for col in schema {
        match col.kind {
            ColumnKind::Numeric => feature_names.push(col.name.clone()),
            ColumnKind::Categorical => feature_names
                .extend(col.categories.iter().map(|c| format!("{}={c}", col.name))),
            _ => {}
        }
    }
    let d = feature_names.len();

    let target_col = schema.iter().position(|c| c.kind.is_target()).unwrap();
    let (targets, class_labels) = match schema[target_col].kind {
        ColumnKind::TargetClass => {
            let mut distinct = HashSet::new();
            for i in 0..n {
                distinct.insert(cell(i, target_col)?.to_string());
            }
            let labels = order_labels(distinct.into_iter().collect());
            let idx = (0..n)
                .map(|i| {
                    let v = cell(i, target_col)?;
                    Ok(labels.iter().position(|l| l == v).unwrap())
                })
                .collect::<Result<Vec<_>>>()?;
            (Targets::Class(idx), labels)
        }
        _ => {
            let values = (0..n)
                .map(|i| parse_number(&schema[target_col], i, cell(i, target_col)?))
                .collect::<Result<Vec<_>>>()?;
            (Targets::Real(values), Vec::new())
        }
    };

    let mut features = Vec::with_capacity(n * d);
    for i in 0..n {
        for (j, col) in schema.iter().enumerate() {
            match col.kind {
                ColumnKind::Numeric => features.push(parse_number(col, i, cell(i, j)?)?),
                ColumnKind::Categorical => {
                    let v = cell(i, j)?;
                    let pos = col.categories.iter().position(|c| c == v).ok_or_else(|| {
                        FidsError::Encoding {
                            column: col.name.clone(),
                            row: i,
                            value: v.to_string(),
                        }
                    })?;
                    features.extend((0..col.categories.len()).map(|c| (c == pos) as u8 as f64));
                }
                _ => {}
            }
        }
    }
    Dataset::new(features, d, targets, feature_names, class_labels)
}

/// Row indices of a train/test partition, each list ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded hold-out partition. With `stratified` set on classification
/// data, each class contributes `round(test_fraction * class_count)` rows
/// to the test side; otherwise the whole set is rounded at once.
pub fn split_indices(
    data: &Dataset,
    test_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<SplitIndices> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return arg_err(format!("test fraction {test_fraction} is outside (0, 1)"));
    }
    if data.n() < 2 {
        return arg_err("splitting needs at least two rows");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Vec<usize>> = match (stratified, data.labels()) {
        (true, Some(labels)) => {
            let mut groups = vec![Vec::new(); data.n_classes()];
            for (i, &c) in labels.iter().enumerate() {
                groups[c].push(i);
            }
            groups
        }
        _ => vec![(0..data.n()).collect()],
    };
    let mut train = Vec::with_capacity(data.n());
    let mut test = Vec::new();
    for mut group in groups {
        let take = (test_fraction * group.len() as f64).round() as usize;
        group.shuffle(&mut rng);
        test.extend_from_slice(&group[..take]);
        train.extend_from_slice(&group[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

pub fn split(
    data: &Dataset,
    test_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<(Dataset, Dataset)> {
    let idx = split_indices(data, test_fraction, seed, stratified)?;
    Ok((data.subset(&idx.train), data.subset(&idx.test)))
}

/// Seeded uniform sample of `cap` rows without replacement, kept in the
/// original row order. Returns the data unchanged when `cap >= n`.
pub fn subsample(data: &Dataset, cap: usize, seed: u64) -> Dataset {
    if cap >= data.n() {
        return data.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = index::sample(&mut rng, data.n(), cap).into_vec();
    rows.sort_unstable();
    data.subset(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iris_schema() -> Vec<ColumnSchema> {
        vec![
            ColumnSchema::numeric("sepal_length"),
            ColumnSchema::numeric("sepal_width"),
            ColumnSchema::numeric("petal_length"),
            ColumnSchema::numeric("petal_width"),
            ColumnSchema::target_class("class"),
        ]
    }

    fn numeric_table(values: &[Option<f64>]) -> RawTable {
        let schema = vec![
            ColumnSchema::numeric("x"),
            ColumnSchema::target_class("y"),
        ];
        let rows = values
            .iter()
            .map(|v| vec![v.map(|x| x.to_string()), Some("a".to_string())])
            .collect();
        RawTable::new(schema, rows).unwrap()
    }

    fn column_values(t: &RawTable) -> Vec<f64> {
        t.column(0).map(|v| v.unwrap().parse().unwrap()).collect()
    }

    #[test]
    fn parses_single_iris_row() {
        let t = parse_csv("5.1,3.5,1.4,0.2,Iris-setosa", &iris_schema(), false).unwrap();
        assert_eq!(t.n_rows(), 1);
        assert_eq!(t.count_missing(), 0);
        assert_eq!(t.cell(0, 4), Some("Iris-setosa"));
    }

    #[test]
    fn missing_marker_becomes_absent() {
        let schema = vec![
            ColumnSchema::numeric("age"),
            ColumnSchema::categorical("workclass", ["State-gov", "Private"]),
            ColumnSchema::categorical("country", ["United-States"]).with_missing_marker("?"),
            ColumnSchema::target_class("income"),
        ];
        let t = parse_csv("39, State-gov, ?, <=50K\n", &schema, false).unwrap();
        assert_eq!(t.cell(0, 1), Some("State-gov"));
        assert_eq!(t.cell(0, 2), None);
    }

    #[test]
    fn ragged_and_empty_inputs_fail() {
        let err = parse_csv("1,2,3,4,a\n1,2,3,a\n", &iris_schema(), false).unwrap_err();
        assert!(matches!(err, FidsError::Parse { row: 1, .. }));
        assert!(matches!(
            parse_csv("\n\n", &iris_schema(), false),
            Err(FidsError::Parse { row: 0, .. })
        ));
        assert!(parse_csv("a,b,c,d,e\n", &iris_schema(), true).is_err());
    }

    #[test]
    fn header_and_blank_lines_are_skipped() {
        let text = "a,b,c,d,e\r\n1,2,3,4,x\r\n\r\n5,6,7,8,y\r\n\r\n";
        let t = parse_csv(text, &iris_schema(), true).unwrap();
        assert_eq!(t.n_rows(), 2);
    }

    #[test]
    fn mean_imputation_examples() {
        let t = impute_mean(&numeric_table(&[Some(1.0), None, Some(3.0)])).unwrap();
        assert_eq!(column_values(&t), vec![1.0, 2.0, 3.0]);

        let full = numeric_table(&[Some(1.5), Some(-2.0)]);
        assert_eq!(impute_mean(&full).unwrap(), full);

        // Hand oracle: present values {2, 4}, mean 3.
        let t = impute_mean(&numeric_table(&[Some(2.0), Some(4.0), None, None])).unwrap();
        assert_eq!(column_values(&t), vec![2.0, 4.0, 3.0, 3.0]);
    }

    #[test]
    fn imputation_of_empty_column_fails() {
        let err = impute_mean(&numeric_table(&[None, None])).unwrap_err();
        assert_eq!(err, FidsError::Imputation { column: "x".into() });
    }

    #[test]
    fn categorical_imputation_uses_mode() {
        let schema = vec![
            ColumnSchema::categorical("c", ["p", "q", "r"]),
            ColumnSchema::target_class("y"),
        ];
        let text = "q,a\nr,a\n?,a\nr,a\nq,a\n";
        let schema: Vec<_> = schema
            .into_iter()
            .map(|c| c.with_missing_marker("?"))
            .collect();
        let t = impute_mean(&parse_csv(text, &schema, false).unwrap()).unwrap();
        // q and r tie at two each; the earlier category wins.
        assert_eq!(t.cell(2, 0), Some("q"));
    }

    #[test]
    fn one_hot_encoding() {
        let schema = vec![
            ColumnSchema::categorical("c", ["a", "b"]),
            ColumnSchema::numeric("x"),
            ColumnSchema::target_class("y"),
        ];
        let t = parse_csv("b,1.5,yes\na,2,no\n", &schema, false).unwrap();
        let ds = encode(&t, &schema).unwrap();
        assert_eq!(ds.d(), 3);
        assert_eq!(ds.row(0), &[0.0, 1.0, 1.5]);
        assert_eq!(ds.row(1), &[1.0, 0.0, 2.0]);
        assert_eq!(ds.feature_names(), &["c=a", "c=b", "x"]);
        assert_eq!(ds.class_labels(), &["no", "yes"]);
        assert_eq!(ds.labels().unwrap(), &[1, 0]);
    }

    #[test]
    fn all_numeric_encoding_is_identity() {
        let t = parse_csv("1,2,3,4,a\n5,6,7,8,b\n", &iris_schema(), false).unwrap();
        let ds = encode(&t, &iris_schema()).unwrap();
        assert_eq!(ds.d(), 4);
        assert_eq!(ds.features(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn abalone_style_width() {
        let mut schema = vec![ColumnSchema::categorical("sex", ["M", "F", "I"])];
        for name in ["len", "diam", "height", "whole", "shucked", "viscera", "shell"] {
            schema.push(ColumnSchema::numeric(name));
        }
        schema.push(ColumnSchema::target_class("rings"));
        let text = "M,0.455,0.365,0.095,0.514,0.2245,0.101,0.15,15\n\
                    I,0.44,0.365,0.125,0.516,0.2155,0.114,0.155,10\n";
        let ds = encode(&parse_csv(text, &schema, false).unwrap(), &schema).unwrap();
        assert_eq!(ds.d(), 10);
        // Numeric label ordering: "10" before "15".
        assert_eq!(ds.class_labels(), &["10", "15"]);
    }

    #[test]
    fn unknown_category_is_reported() {
        let schema = vec![
            ColumnSchema::categorical("c", ["a", "b"]),
            ColumnSchema::target_class("y"),
        ];
        let t = parse_csv("a,x\nz,y\n", &schema, false).unwrap();
        assert_eq!(
            encode(&t, &schema).unwrap_err(),
            FidsError::Encoding {
                column: "c".into(),
                row: 1,
                value: "z".into()
            }
        );
    }

    #[test]
    fn schema_validation() {
        let no_target = vec![ColumnSchema::numeric("x")];
        assert!(validate_schema(&no_target).is_err());
        let dup = vec![
            ColumnSchema::categorical("c", ["a", "a"]),
            ColumnSchema::target_class("y"),
        ];
        assert!(validate_schema(&dup).is_err());
        let empty = vec![
            ColumnSchema::categorical("c", Vec::<String>::new()),
            ColumnSchema::target_class("y"),
        ];
        assert!(validate_schema(&empty).is_err());
    }

    fn labelled(counts: &[usize]) -> Dataset {
        let labels: Vec<usize> = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &k)| std::iter::repeat_n(c, k))
            .collect();
        let rows: Vec<Vec<f64>> = (0..labels.len()).map(|i| vec![i as f64]).collect();
        Dataset::from_rows(&rows, &labels).unwrap()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let ds = labelled(&[10]);
        let s = split_indices(&ds, 0.2, 3, false).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (8, 2));
        assert_eq!(s, split_indices(&ds, 0.2, 3, false).unwrap());
        let a = split(&ds, 0.2, 42, true).unwrap();
        let b = split(&ds, 0.2, 42, true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stratified_split_rounds_per_class() {
        let ds = labelled(&[60, 30, 10]);
        let (_, test) = split(&ds, 0.2, 7, true).unwrap();
        let mut counts = [0; 3];
        for &c in test.labels().unwrap() {
            counts[c] += 1;
        }
        assert_eq!(counts, [12, 6, 2]);
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let ds = labelled(&[5, 5]);
        for f in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(split(&ds, f, 0, true), Err(FidsError::Argument(_))));
        }
    }

    #[test]
    fn subsample_caps_rows() {
        let ds = labelled(&[50, 50]);
        let s = subsample(&ds, 20, 1);
        assert_eq!(s.n(), 20);
        assert_eq!(s, subsample(&ds, 20, 1));
        assert_eq!(subsample(&ds, 500, 1), ds);
    }
}
