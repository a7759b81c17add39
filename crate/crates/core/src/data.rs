//! Typed in-memory microdata with exact point geocodes.
//!
//! A [`Dataset`] holds `n` records over categorical variables (stored as
//! 1-based level codes) plus at most one geocode variable (meter offsets
//! east/north of a fixed reference point). Datasets are immutable after
//! construction and safe to share read-only across parallel tasks.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact point location: meter offsets east (`x`) and north (`y`) of the
/// reference point. Identity (for dictionary encoding and exact matching)
/// is bit equality of both coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub x: f64,
    pub y: f64,
}

impl GeoPoint {
    pub fn new(x: f64, y: f64) -> Self {
        GeoPoint { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Squared Euclidean distance in square meters.
    pub fn dist_sq(&self, other: &GeoPoint) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(&self, other: &GeoPoint) -> f64 {
        self.dist_sq(other).sqrt()
    }

    /// Bit pattern used for exact identity.
    pub fn bits(&self) -> (u64, u64) {
        (self.x.to_bits(), self.y.to_bits())
    }
}

/// Kind of a schema variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VarKind {
    /// Unordered categorical with a declared, fixed level dictionary.
    /// Codes in a dataset are 1-based indices into `levels`.
    Categorical { levels: Vec<String> },
    /// Exact point geocode, stored as two CSV columns `geo_x`, `geo_y`.
    Geocode,
}

/// A named variable in a schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
}

impl Variable {
    pub fn categorical(name: impl Into<String>, levels: Vec<String>) -> Self {
        Variable {
            name: name.into(),
            kind: VarKind::Categorical { levels },
        }
    }

    pub fn geocode(name: impl Into<String>) -> Self {
        Variable {
            name: name.into(),
            kind: VarKind::Geocode,
        }
    }

    /// Number of categories `d_k`, or `None` for the geocode variable.
    pub fn arity(&self) -> Option<usize> {
        match &self.kind {
            VarKind::Categorical { levels } => Some(levels.len()),
            VarKind::Geocode => None,
        }
    }

    pub fn is_geocode(&self) -> bool {
        matches!(self.kind, VarKind::Geocode)
    }
}

/// Ordered variable list plus the synthesis-target and quasi-identifier
/// subsets. Levels are declared up front, not inferred from data, so that
/// category counts are stable across original and synthetic files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    variables: Vec<Variable>,
    synthesis_targets: Vec<String>,
    quasi_identifiers: Vec<String>,
}

impl Schema {
    /// Builds a microdata schema: exactly one geocode variable, every
    /// categorical variable with at least two declared levels, and the
    /// target/quasi-identifier lists restricted to declared names.
    pub fn new(
        variables: Vec<Variable>,
        synthesis_targets: Vec<String>,
        quasi_identifiers: Vec<String>,
    ) -> Result<Self> {
        let geocodes = variables.iter().filter(|v| v.is_geocode()).count();
        if geocodes != 1 {
            return Err(Error::schema(format!(
                "expected exactly one geocode variable, found {geocodes}"
            )));
        }
        Self::validated(variables, synthesis_targets, quasi_identifiers, 2)
    }

    /// Builds a fully categorical schema (no geocode variable), as used for
    /// dictionary-encoded data and latent-class modelling.
    pub fn categorical(
        variables: Vec<Variable>,
        synthesis_targets: Vec<String>,
        quasi_identifiers: Vec<String>,
    ) -> Result<Self> {
        if variables.iter().any(|v| v.is_geocode()) {
            return Err(Error::schema(
                "Schema::categorical does not accept geocode variables",
            ));
        }
        Self::validated(variables, synthesis_targets, quasi_identifiers, 2)
    }

    fn validated(
        variables: Vec<Variable>,
        synthesis_targets: Vec<String>,
        quasi_identifiers: Vec<String>,
        min_arity: usize,
    ) -> Result<Self> {
        let mut seen = HashMap::new();
        for (i, v) in variables.iter().enumerate() {
            if let Some(_prev) = seen.insert(v.name.clone(), i) {
                return Err(Error::schema(format!("duplicate variable name `{}`", v.name)));
            }
            if let Some(d) = v.arity() {
                if d < min_arity {
                    return Err(Error::schema(format!(
                        "variable `{}` declares {d} levels, need at least {min_arity}",
                        v.name
                    )));
                }
            }
        }
        for name in synthesis_targets.iter().chain(quasi_identifiers.iter()) {
            if !seen.contains_key(name) {
                return Err(Error::schema(format!(
                    "`{name}` named in targets/quasi-identifiers is not a declared variable"
                )));
            }
        }
        Ok(Schema {
            variables,
            synthesis_targets,
            quasi_identifiers,
        })
    }

    /// Internal constructor for derived schemas, e.g. the geocode column
    /// re-encoded as a categorical variable (which may have a single level
    /// when every record of a cluster sits on the same point).
    pub(crate) fn raw(
        variables: Vec<Variable>,
        synthesis_targets: Vec<String>,
        quasi_identifiers: Vec<String>,
    ) -> Self {
        Schema {
            variables,
            synthesis_targets,
            quasi_identifiers,
        }
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn synthesis_targets(&self) -> &[String] {
        &self.synthesis_targets
    }

    pub fn quasi_identifiers(&self) -> &[String] {
        &self.quasi_identifiers
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Index of the geocode variable, if the schema declares one.
    pub fn geocode_index(&self) -> Option<usize> {
        self.variables.iter().position(|v| v.is_geocode())
    }

    /// Parses a schema from its TOML representation.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: SchemaFile =
            toml::from_str(text).map_err(|e| Error::Schema(format!("parse: {e}")))?;
        file.into_schema()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        let file = SchemaFile {
            synthesis_targets: self.synthesis_targets.clone(),
            quasi_identifiers: self.quasi_identifiers.clone(),
            variable: self
                .variables
                .iter()
                .map(|v| VariableFile {
                    name: v.name.clone(),
                    kind: match v.kind {
                        VarKind::Categorical { .. } => "categorical".into(),
                        VarKind::Geocode => "geocode".into(),
                    },
                    levels: match &v.kind {
                        VarKind::Categorical { levels } => Some(levels.clone()),
                        VarKind::Geocode => None,
                    },
                })
                .collect(),
        };
        toml::to_string(&file).expect("schema serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SchemaFile {
    #[serde(default)]
    synthesis_targets: Vec<String>,
    #[serde(default)]
    quasi_identifiers: Vec<String>,
    variable: Vec<VariableFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct VariableFile {
    name: String,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    levels: Option<Vec<String>>,
}

impl SchemaFile {
    fn into_schema(self) -> Result<Schema> {
        let mut variables = Vec::with_capacity(self.variable.len());
        for v in self.variable {
            let kind = match v.kind.as_str() {
                "categorical" => {
                    let levels = v.levels.ok_or_else(|| {
                        Error::schema(format!("variable `{}` is categorical but lists no levels", v.name))
                    })?;
                    VarKind::Categorical { levels }
                }
                "geocode" => VarKind::Geocode,
                other => {
                    return Err(Error::schema(format!(
                        "variable `{}` has unknown kind `{other}`",
                        v.name
                    )))
                }
            };
            variables.push(Variable { name: v.name, kind });
        }
        Schema::new(variables, self.synthesis_targets, self.quasi_identifiers)
    }
}

/// One column of a dataset, parallel to the schema's variable list.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    /// 1-based level codes, `1..=d_k`.
    Categorical(Vec<u32>),
    Geocode(Vec<GeoPoint>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Categorical(v) => v.len(),
            Column::Geocode(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Immutable table of `n` records conforming to a [`Schema`].
///
/// `source_rows` tracks each record's row index in the dataset it was
/// originally loaded from; cluster splits preserve it so releases can be
/// reassembled in original record order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Arc<Schema>,
    columns: Vec<Column>,
    source_rows: Vec<usize>,
}

impl Dataset {
    /// Assembles and validates a dataset: one column per schema variable,
    /// equal lengths, categorical cells within `1..=d_k`, finite geocodes.
    pub fn new(schema: Arc<Schema>, columns: Vec<Column>) -> Result<Self> {
        let n = columns.first().map_or(0, Column::len);
        let source_rows = (0..n).collect();
        Self::with_source_rows(schema, columns, source_rows)
    }

    pub(crate) fn with_source_rows(
        schema: Arc<Schema>,
        columns: Vec<Column>,
        source_rows: Vec<usize>,
    ) -> Result<Self> {
        if columns.len() != schema.variables().len() {
            return Err(Error::invalid(format!(
                "dataset has {} columns, schema declares {}",
                columns.len(),
                schema.variables().len()
            )));
        }
        let n = source_rows.len();
        for (var, col) in schema.variables().iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::invalid(format!(
                    "column `{}` has {} cells, expected {n}",
                    var.name,
                    col.len()
                )));
            }
            match (&var.kind, col) {
                (VarKind::Categorical { levels }, Column::Categorical(codes)) => {
                    let d = levels.len() as u32;
                    if let Some(bad) = codes.iter().position(|&c| c < 1 || c > d) {
                        return Err(Error::invalid(format!(
                            "column `{}` row {bad}: code {} outside 1..={d}",
                            var.name, codes[bad]
                        )));
                    }
                }
                (VarKind::Geocode, Column::Geocode(points)) => {
                    if let Some(bad) = points.iter().position(|p| !p.is_finite()) {
                        return Err(Error::invalid(format!(
                            "column `{}` row {bad}: non-finite geocode",
                            var.name
                        )));
                    }
                }
                _ => {
                    return Err(Error::invalid(format!(
                        "column `{}` does not match its declared kind",
                        var.name
                    )))
                }
            }
        }
        Ok(Dataset {
            schema,
            columns,
            source_rows,
        })
    }

    pub fn n(&self) -> usize {
        self.source_rows.len()
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn schema_arc(&self) -> Arc<Schema> {
        Arc::clone(&self.schema)
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, idx: usize) -> &Column {
        &self.columns[idx]
    }

    /// Level codes of a categorical column.
    pub fn cat_codes(&self, idx: usize) -> Result<&[u32]> {
        match &self.columns[idx] {
            Column::Categorical(codes) => Ok(codes),
            Column::Geocode(_) => Err(Error::invalid(format!(
                "column `{}` is not categorical",
                self.schema.variables()[idx].name
            ))),
        }
    }

    /// The geocode column, if the schema declares one.
    pub fn geocode_points(&self) -> Result<&[GeoPoint]> {
        let idx = self
            .schema
            .geocode_index()
            .ok_or_else(|| Error::invalid("dataset has no geocode column".to_string()))?;
        match &self.columns[idx] {
            Column::Geocode(points) => Ok(points),
            Column::Categorical(_) => unreachable!("schema kind mismatch"),
        }
    }

    pub fn source_rows(&self) -> &[usize] {
        &self.source_rows
    }

    /// Replaces one column, keeping schema and provenance. The new column
    /// must satisfy the schema's constraints for that variable.
    pub fn with_column(&self, idx: usize, column: Column) -> Result<Dataset> {
        let mut columns = self.columns.clone();
        columns[idx] = column;
        Self::with_source_rows(Arc::clone(&self.schema), columns, self.source_rows.clone())
    }

    /// Scans every cell against the schema ranges; used by tests and after
    /// synthesis steps.
    pub fn validate_cells(&self) -> Result<()> {
        Self::with_source_rows(
            Arc::clone(&self.schema),
            self.columns.clone(),
            self.source_rows.clone(),
        )
        .map(drop)
    }

    /// Loads a dataset from CSV. The header must list every categorical
    /// variable by name and the geocode variable as the column pair
    /// `geo_x`,`geo_y`, in schema order. Cells are mapped to 1-based codes
    /// via the schema's level dictionaries.
    pub fn load_csv(path: impl AsRef<Path>, schema: Arc<Schema>) -> Result<Dataset> {
        let file = fs::File::open(path.as_ref())?;
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);

        let expected = csv_header(&schema);
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| Error::Csv { row: 0, msg: e.to_string() })?
            .iter()
            .map(str::to_string)
            .collect();
        if header != expected {
            return Err(Error::Csv {
                row: 0,
                msg: format!("header {header:?} does not match schema columns {expected:?}"),
            });
        }

        // Per-variable label -> 1-based code dictionaries.
        let lookups: Vec<Option<HashMap<&str, u32>>> = schema
            .variables()
            .iter()
            .map(|v| match &v.kind {
                VarKind::Categorical { levels } => Some(
                    levels
                        .iter()
                        .enumerate()
                        .map(|(i, l)| (l.as_str(), i as u32 + 1))
                        .collect(),
                ),
                VarKind::Geocode => None,
            })
            .collect();

        let mut columns: Vec<Column> = schema
            .variables()
            .iter()
            .map(|v| match v.kind {
                VarKind::Categorical { .. } => Column::Categorical(Vec::new()),
                VarKind::Geocode => Column::Geocode(Vec::new()),
            })
            .collect();

        for (row_idx, record) in reader.records().enumerate() {
            let row = row_idx + 1;
            let record = record.map_err(|e| Error::Csv { row, msg: e.to_string() })?;
            if record.len() != expected.len() {
                return Err(Error::Csv {
                    row,
                    msg: format!("expected {} fields, found {}", expected.len(), record.len()),
                });
            }
            let mut field = 0usize;
            for (var_idx, var) in schema.variables().iter().enumerate() {
                match &mut columns[var_idx] {
                    Column::Categorical(codes) => {
                        let cell = &record[field];
                        let code = lookups[var_idx]
                            .as_ref()
                            .expect("categorical lookup")
                            .get(cell)
                            .copied()
                            .ok_or_else(|| Error::Csv {
                                row,
                                msg: format!(
                                    "unknown label `{cell}` in column `{}`",
                                    var.name
                                ),
                            })?;
                        codes.push(code);
                        field += 1;
                    }
                    Column::Geocode(points) => {
                        let x: f64 = record[field].parse().map_err(|_| Error::Csv {
                            row,
                            msg: format!("non-numeric geocode `{}` in column `geo_x`", &record[field]),
                        })?;
                        let y: f64 = record[field + 1].parse().map_err(|_| Error::Csv {
                            row,
                            msg: format!("non-numeric geocode `{}` in column `geo_y`", &record[field + 1]),
                        })?;
                        let p = GeoPoint::new(x, y);
                        if !p.is_finite() {
                            return Err(Error::Csv {
                                row,
                                msg: "non-finite geocode".into(),
                            });
                        }
                        points.push(p);
                        field += 2;
                    }
                }
            }
        }

        Dataset::new(schema, columns)
    }

    /// Writes the dataset as CSV: header plus `n` rows, categorical cells
    /// as their declared labels, geocodes as two full-precision columns.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = fs::File::create(path.as_ref())?;
        let mut writer = csv::Writer::from_writer(file);
        writer
            .write_record(csv_header(&self.schema))
            .map_err(csv_io)?;

        let n = self.n();
        let mut buf = String::new();
        for i in 0..n {
            let mut record: Vec<String> = Vec::with_capacity(self.columns.len() + 1);
            for (var, col) in self.schema.variables().iter().zip(&self.columns) {
                match (col, &var.kind) {
                    (Column::Categorical(codes), VarKind::Categorical { levels }) => {
                        record.push(levels[codes[i] as usize - 1].clone());
                    }
                    (Column::Geocode(points), VarKind::Geocode) => {
                        // `{}` prints the shortest representation that
                        // round-trips the f64 exactly.
                        buf.clear();
                        write!(buf, "{}", points[i].x).unwrap();
                        record.push(buf.clone());
                        buf.clear();
                        write!(buf, "{}", points[i].y).unwrap();
                        record.push(buf.clone());
                    }
                    _ => unreachable!("validated on construction"),
                }
            }
            writer.write_record(&record).map_err(csv_io)?;
        }
        writer.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Csv { row: 0, msg: e.to_string() }
}

/// CSV column names for a schema: variable names, with the geocode variable
/// expanded into the fixed `geo_x`,`geo_y` pair.
pub fn csv_header(schema: &Schema) -> Vec<String> {
    let mut header = Vec::new();
    for v in schema.variables() {
        match v.kind {
            VarKind::Categorical { .. } => header.push(v.name.clone()),
            VarKind::Geocode => {
                header.push("geo_x".into());
                header.push("geo_y".into());
            }
        }
    }
    header
}

/// Dictionary mapping 1-based cell codes back to the distinct geocodes they
/// encode. Inverse of [`concat_geocode_as_categorical`].
#[derive(Debug, Clone)]
pub struct GeoCodebook {
    points: Vec<GeoPoint>,
}

impl GeoCodebook {
    /// Number of distinct points, i.e. the arity of the encoded variable.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn decode(&self, code: u32) -> GeoPoint {
        self.points[code as usize - 1]
    }

    /// Code of a point already present in the codebook (bit-exact match).
    pub fn encode(&self, p: &GeoPoint) -> Option<u32> {
        let bits = p.bits();
        self.points
            .iter()
            .position(|q| q.bits() == bits)
            .map(|i| i as u32 + 1)
    }

    pub fn points(&self) -> &[GeoPoint] {
        &self.points
    }
}

/// Replaces the geocode column by an unordered categorical variable whose
/// levels are the distinct `(x, y)` pairs of the dataset, in first-occurrence
/// order. Point identity is exact bit equality; the original geocodes come
/// from a finite address grid, so no tolerance is involved.
pub fn concat_geocode_as_categorical(ds: &Dataset) -> Result<(Dataset, GeoCodebook)> {
    let geo_idx = ds
        .schema()
        .geocode_index()
        .ok_or_else(|| Error::invalid("dataset has no geocode column to encode".to_string()))?;
    let points = ds.geocode_points()?;

    let mut codebook: Vec<GeoPoint> = Vec::new();
    let mut index: HashMap<(u64, u64), u32> = HashMap::new();
    let mut codes: Vec<u32> = Vec::with_capacity(points.len());
    for p in points {
        let code = *index.entry(p.bits()).or_insert_with(|| {
            codebook.push(*p);
            codebook.len() as u32
        });
        codes.push(code);
    }

    let geo_name = ds.schema().variables()[geo_idx].name.clone();
    let levels: Vec<String> = codebook
        .iter()
        .map(|p| format!("{};{}", p.x, p.y))
        .collect();
    let variables: Vec<Variable> = ds
        .schema()
        .variables()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if i == geo_idx {
                Variable::categorical(geo_name.clone(), levels.clone())
            } else {
                v.clone()
            }
        })
        .collect();
    let schema = Arc::new(Schema::raw(
        variables,
        ds.schema().synthesis_targets().to_vec(),
        ds.schema().quasi_identifiers().to_vec(),
    ));

    let columns: Vec<Column> = ds
        .columns()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if i == geo_idx {
                Column::Categorical(codes.clone())
            } else {
                c.clone()
            }
        })
        .collect();

    let encoded = Dataset::with_source_rows(schema, columns, ds.source_rows().to_vec())?;
    Ok((encoded, GeoCodebook { points: codebook }))
}

/// Inverse of [`concat_geocode_as_categorical`]: maps the encoded variable
/// back to a geocode column under the original schema.
pub fn decode_geocode_column(
    encoded: &Dataset,
    codebook: &GeoCodebook,
    original_schema: Arc<Schema>,
    geo_var: &str,
) -> Result<Dataset> {
    let enc_idx = encoded
        .schema()
        .var_index(geo_var)
        .ok_or_else(|| Error::invalid(format!("no variable `{geo_var}` in encoded dataset")))?;
    let codes = encoded.cat_codes(enc_idx)?;
    let points: Vec<GeoPoint> = codes.iter().map(|&c| codebook.decode(c)).collect();

    let columns: Vec<Column> = encoded
        .columns()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if i == enc_idx {
                Column::Geocode(points.clone())
            } else {
                c.clone()
            }
        })
        .collect();
    Dataset::with_source_rows(original_schema, columns, encoded.source_rows().to_vec())
}

/// A release of `m` synthetic replicates sharing the original schema.
/// Unsynthesized columns are byte-identical to the original.
#[derive(Debug, Clone)]
pub struct SyntheticRelease {
    pub replicates: Vec<Dataset>,
    pub synthesized_variables: Vec<String>,
}

impl SyntheticRelease {
    pub fn m(&self) -> usize {
        self.replicates.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_schema() -> Arc<Schema> {
        Arc::new(
            Schema::new(
                vec![
                    Variable::categorical("sex", vec!["male".into(), "female".into()]),
                    Variable::geocode("geo"),
                ],
                vec!["geo".into()],
                vec!["sex".into()],
            )
            .unwrap(),
        )
    }

    fn toy_dataset() -> Dataset {
        Dataset::new(
            toy_schema(),
            vec![
                Column::Categorical(vec![1, 2, 1]),
                Column::Geocode(vec![
                    GeoPoint::new(0.5, 1.5),
                    GeoPoint::new(-3.25, 7.0),
                    GeoPoint::new(0.5, 1.5),
                ]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn schema_rejects_zero_or_two_geocodes() {
        let no_geo = Schema::new(
            vec![Variable::categorical("a", vec!["x".into(), "y".into()])],
            vec![],
            vec![],
        );
        assert!(matches!(no_geo, Err(Error::Schema(_))));
        let two_geo = Schema::new(
            vec![Variable::geocode("g1"), Variable::geocode("g2")],
            vec![],
            vec![],
        );
        assert!(matches!(two_geo, Err(Error::Schema(_))));
    }

    #[test]
    fn schema_rejects_unary_levels_and_unknown_subsets() {
        let unary = Schema::new(
            vec![
                Variable::categorical("a", vec!["only".into()]),
                Variable::geocode("geo"),
            ],
            vec![],
            vec![],
        );
        assert!(unary.is_err());
        let unknown = Schema::new(
            vec![
                Variable::categorical("a", vec!["x".into(), "y".into()]),
                Variable::geocode("geo"),
            ],
            vec!["nope".into()],
            vec![],
        );
        assert!(unknown.is_err());
    }

    #[test]
    fn load_csv_three_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.csv");
        fs::write(&path, "sex,geo_x,geo_y\nmale,0.5,1.5\nfemale,-3.25,7\nmale,0.5,1.5\n").unwrap();
        let ds = Dataset::load_csv(&path, toy_schema()).unwrap();
        assert_eq!(ds.n(), 3);
        assert_eq!(ds.cat_codes(0).unwrap(), &[1, 2, 1]);
        assert_eq!(ds.schema().variables()[0].arity(), Some(2));
        assert_eq!(ds.geocode_points().unwrap()[1], GeoPoint::new(-3.25, 7.0));
    }

    #[test]
    fn load_csv_unknown_label_names_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "sex,geo_x,geo_y\nmale,0,0\nunknown,1,1\n").unwrap();
        let err = Dataset::load_csv(&path, toy_schema()).unwrap_err();
        match err {
            Error::Csv { row, msg } => {
                assert_eq!(row, 2);
                assert!(msg.contains("unknown"), "{msg}");
                assert!(msg.contains("sex"), "{msg}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn load_csv_non_numeric_geocode_and_arity_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "sex,geo_x,geo_y\nmale,abc,0\n").unwrap();
        let err = Dataset::load_csv(&path, toy_schema()).unwrap_err();
        assert!(matches!(err, Error::Csv { row: 1, .. }), "{err:?}");

        // The csv reader flags unequal field counts itself; the row number
        // must still point at the offending record.
        let path2 = dir.path().join("short.csv");
        fs::write(&path2, "sex,geo_x,geo_y\nmale,1\n").unwrap();
        let err2 = Dataset::load_csv(&path2, toy_schema()).unwrap_err();
        assert!(matches!(err2, Error::Csv { row: 1, .. }), "{err2:?}");
    }

    #[test]
    fn save_then_load_is_identity() {
        let ds = toy_dataset();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("round.csv");
        ds.save_csv(&path).unwrap();
        let reloaded = Dataset::load_csv(&path, toy_schema()).unwrap();
        assert_eq!(ds, reloaded);

        // Byte-level fixpoint: saving the reloaded dataset reproduces the file.
        let path2 = dir.path().join("round2.csv");
        reloaded.save_csv(&path2).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }

    #[test]
    fn save_csv_empty_dataset_is_header_only() {
        let ds = Dataset::new(
            toy_schema(),
            vec![Column::Categorical(vec![]), Column::Geocode(vec![])],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        ds.save_csv(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "sex,geo_x,geo_y\n");
    }

    #[test]
    fn save_csv_n3_is_four_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("n3.csv");
        toy_dataset().save_csv(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn geocode_encoding_single_point() {
        let ds = Dataset::new(
            toy_schema(),
            vec![
                Column::Categorical(vec![1, 1, 2]),
                Column::Geocode(vec![GeoPoint::new(1.0, 2.0); 3]),
            ],
        )
        .unwrap();
        let (encoded, codebook) = concat_geocode_as_categorical(&ds).unwrap();
        assert_eq!(codebook.len(), 1);
        assert_eq!(encoded.schema().variables()[1].arity(), Some(1));
        assert_eq!(encoded.cat_codes(1).unwrap(), &[1, 1, 1]);
    }

    #[test]
    fn geocode_encoding_roundtrips_exactly() {
        let ds = toy_dataset();
        let (encoded, codebook) = concat_geocode_as_categorical(&ds).unwrap();
        assert_eq!(codebook.len(), 2);
        let decoded =
            decode_geocode_column(&encoded, &codebook, ds.schema_arc(), "geo").unwrap();
        assert_eq!(decoded, ds);
    }

    #[test]
    fn geocode_encoding_distinct_count_matches_sort_dedupe_oracle() {
        // 1,500 records with duplicates drawn from a small address pool.
        let mut points = Vec::new();
        let mut state = 0x243F_6A88_85A3_08D3u64;
        for _ in 0..1500 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let xi = (state >> 33) % 40;
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let yi = (state >> 33) % 25;
            points.push(GeoPoint::new(xi as f64 * 12.5, yi as f64 * 7.25));
        }
        let ds = Dataset::new(
            Arc::new(
                Schema::new(
                    vec![
                        Variable::categorical("sex", vec!["male".into(), "female".into()]),
                        Variable::geocode("geo"),
                    ],
                    vec![],
                    vec![],
                )
                .unwrap(),
            ),
            vec![
                Column::Categorical(vec![1; 1500]),
                Column::Geocode(points.clone()),
            ],
        )
        .unwrap();
        let (_, codebook) = concat_geocode_as_categorical(&ds).unwrap();

        let mut bits: Vec<(u64, u64)> = points.iter().map(GeoPoint::bits).collect();
        bits.sort_unstable();
        bits.dedup();
        assert_eq!(codebook.len(), bits.len());
    }

    #[test]
    fn dataset_rejects_out_of_range_codes() {
        let bad = Dataset::new(
            toy_schema(),
            vec![
                Column::Categorical(vec![1, 3]),
                Column::Geocode(vec![GeoPoint::new(0.0, 0.0); 2]),
            ],
        );
        assert!(bad.is_err());
        let zero = Dataset::new(
            toy_schema(),
            vec![
                Column::Categorical(vec![0]),
                Column::Geocode(vec![GeoPoint::new(0.0, 0.0)]),
            ],
        );
        assert!(zero.is_err());
    }

    #[test]
    fn schema_toml_roundtrip() {
        let schema = toy_schema();
        let text = schema.to_toml_string();
        let parsed = Schema::from_toml_str(&text).unwrap();
        assert_eq!(*schema, parsed);
    }
}
