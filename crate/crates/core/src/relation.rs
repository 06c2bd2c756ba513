//! Relations, CSV ingestion, joins and the marketplace catalog.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attrs::AttrSet;
use crate::error::{Error, Result};
use crate::partition::Fd;

/// A single cell.
#[derive(Debug, Clone)]
pub enum Value {
    Null,
    Text(Arc<str>),
    Num(f64),
}

impl Value {
    pub fn text(s: &str) -> Value {
        Value::Text(Arc::from(s))
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            _ => None,
        }
    }

    fn norm_bits(x: f64) -> u64 {
        if x == 0.0 {
            0.0f64.to_bits()
        } else {
            x.to_bits()
        }
    }

    /// Canonical bytes used by the sampling hash: a tag, a length prefix and the payload.
    pub fn encode_into(&self, out: &mut Vec<u8>) {
        match self {
            Value::Null => {
                out.push(0);
                out.extend_from_slice(&0u32.to_le_bytes());
            }
            Value::Text(s) => {
                out.push(1);
                out.extend_from_slice(&(s.len() as u32).to_le_bytes());
                out.extend_from_slice(s.as_bytes());
            }
            Value::Num(x) => {
                out.push(2);
                out.extend_from_slice(&8u32.to_le_bytes());
                out.extend_from_slice(&Self::norm_bits(*x).to_le_bytes());
            }
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Null, Value::Null) => true,
            (Value::Text(a), Value::Text(b)) => a == b,
            (Value::Num(a), Value::Num(b)) => Self::norm_bits(*a) == Self::norm_bits(*b),
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Value::Null => 0u8.hash(state),
            Value::Text(s) => {
                1u8.hash(state);
                s.hash(state);
            }
            Value::Num(x) => {
                2u8.hash(state);
                Self::norm_bits(*x).hash(state);
            }
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => Ok(()),
            Value::Text(s) => f.write_str(s),
            Value::Num(x) => write!(f, "{x}"),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        if s.is_empty() {
            Value::Null
        } else {
            Value::text(s)
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Num(x)
    }
}

impl From<i64> for Value {
    fn from(x: i64) -> Self {
        Value::Num(x as f64)
    }
}

/// A named table stored column by column. Row ids are the 0-based positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    name: String,
    schema: Vec<String>,
    columns: Vec<Vec<Value>>,
    numeric: Vec<bool>,
    n_rows: usize,
}

impl Relation {
    /// Builds a relation from rows, checking arity and attribute uniqueness.
    pub fn from_rows(name: &str, schema: &[&str], rows: Vec<Vec<Value>>) -> Result<Relation> {
        let schema: Vec<String> = schema.iter().map(|s| s.to_string()).collect();
        Self::from_owned_rows(name, schema, rows)
    }

    pub fn from_owned_rows(name: &str, schema: Vec<String>, rows: Vec<Vec<Value>>) -> Result<Relation> {
        check_schema(&schema)?;
        let mut columns: Vec<Vec<Value>> = vec![Vec::with_capacity(rows.len()); schema.len()];
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != schema.len() {
                return Err(Error::Schema(format!(
                    "row {i} has {} values, schema has {}",
                    row.len(),
                    schema.len()
                )));
            }
            for (c, v) in row.into_iter().enumerate() {
                columns[c].push(v);
            }
        }
        Ok(Self::from_columns_unchecked(name.to_string(), schema, columns))
    }

    /// Builds a relation from string rows; empty strings become NULL and
    /// column kinds are inferred the same way as for CSV input.
    pub fn from_strings(name: &str, schema: &[&str], rows: &[&[&str]]) -> Result<Relation> {
        let schema: Vec<String> = schema.iter().map(|s| s.to_string()).collect();
        check_schema(&schema)?;
        let mut raw: Vec<Vec<String>> = vec![Vec::with_capacity(rows.len()); schema.len()];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(Error::Schema(format!("row {i} has {} values", row.len())));
            }
            for (c, v) in row.iter().enumerate() {
                raw[c].push(v.to_string());
            }
        }
        Ok(Self::from_raw_columns(name.to_string(), schema, raw))
    }

    fn from_raw_columns(name: String, schema: Vec<String>, raw: Vec<Vec<String>>) -> Relation {
        let columns = raw.into_iter().map(infer_column).collect();
        Self::from_columns_unchecked(name, schema, columns)
    }

    fn from_columns_unchecked(name: String, schema: Vec<String>, columns: Vec<Vec<Value>>) -> Relation {
        let n_rows = columns.first().map_or(0, Vec::len);
        let numeric = columns
            .iter()
            .map(|col| col.iter().all(|v| matches!(v, Value::Num(_) | Value::Null)))
            .collect();
        Relation { name, schema, columns, numeric, n_rows }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn schema(&self) -> &[String] {
        &self.schema
    }

    pub fn attr_set(&self) -> AttrSet {
        self.schema.iter().collect()
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_attrs(&self) -> usize {
        self.schema.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn has_attr(&self, attr: &str) -> bool {
        self.schema.iter().any(|a| a == attr)
    }

    pub fn index_of(&self, attr: &str) -> Result<usize> {
        self.schema
            .iter()
            .position(|a| a == attr)
            .ok_or_else(|| Error::UnknownAttribute(attr.to_string()))
    }

    /// Column indices for `attrs`, in the set's order.
    pub fn indices_of(&self, attrs: &AttrSet) -> Result<Vec<usize>> {
        attrs.iter().map(|a| self.index_of(a)).collect()
    }

    pub fn column(&self, idx: usize) -> &[Value] {
        &self.columns[idx]
    }

    /// True when every non-NULL cell of the column is a finite number.
    pub fn is_numeric(&self, idx: usize) -> bool {
        self.numeric[idx]
    }

    pub fn value(&self, row: usize, col: usize) -> &Value {
        &self.columns[col][row]
    }

    pub fn row(&self, row: usize) -> Vec<Value> {
        self.columns.iter().map(|c| c[row].clone()).collect()
    }

    pub fn key(&self, row: usize, cols: &[usize]) -> Vec<Value> {
        cols.iter().map(|&c| self.columns[c][row].clone()).collect()
    }

    pub fn with_name(&self, name: &str) -> Relation {
        let mut r = self.clone();
        r.name = name.to_string();
        r
    }

    /// Projection onto `attrs` (schema order preserved, duplicates kept).
    pub fn project(&self, attrs: &AttrSet) -> Result<Relation> {
        for a in attrs.iter() {
            self.index_of(a)?;
        }
        let keep: Vec<usize> = (0..self.n_attrs()).filter(|&i| attrs.contains(&self.schema[i])).collect();
        let schema = keep.iter().map(|&i| self.schema[i].clone()).collect();
        let columns = keep.iter().map(|&i| self.columns[i].clone()).collect();
        let mut r = Self::from_columns_unchecked(self.name.clone(), schema, columns);
        r.n_rows = self.n_rows;
        Ok(r)
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Relation {
        let columns = self
            .columns
            .iter()
            .map(|c| rows.iter().map(|&r| c[r].clone()).collect())
            .collect();
        let mut r = Self::from_columns_unchecked(self.name.clone(), self.schema.clone(), columns);
        r.n_rows = rows.len();
        r
    }

    /// Writes the relation as CSV with a header row. NULL is written as an empty field.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.schema).map_err(csv_err)?;
        for r in 0..self.n_rows {
            let rec: Vec<String> = self.columns.iter().map(|c| c[r].to_string()).collect();
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn check_schema(schema: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for a in schema {
        if a.is_empty() {
            return Err(Error::Schema("empty attribute name".into()));
        }
        if !seen.insert(a.as_str()) {
            return Err(Error::Schema(format!("duplicate attribute `{a}`")));
        }
    }
    Ok(())
}

fn infer_column(raw: Vec<String>) -> Vec<Value> {
    let parsed: Option<Vec<Value>> = raw
        .iter()
        .map(|s| {
            if s.is_empty() {
                Some(Value::Null)
            } else {
                s.parse::<f64>().ok().filter(|x| x.is_finite()).map(Value::Num)
            }
        })
        .collect();
    match parsed {
        Some(vals) => vals,
        None => raw.iter().map(|s| Value::from(s.as_str())).collect(),
    }
}

/// Reads a CSV file whose first line names the attributes.
pub fn load_csv(path: impl AsRef<Path>, name: &str) -> Result<Relation> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_csv(file, name, &path.display().to_string())
}

/// Same as [`load_csv`] over any reader; `source_name` is used in error messages.
pub fn read_csv<R: std::io::Read>(input: R, name: &str, source_name: &str) -> Result<Relation> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(input);
    let header = rdr.headers().map_err(|e| Error::Ingestion {
        source_name: source_name.into(),
        line: 1,
        message: e.to_string(),
    })?;
    let schema: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    if schema.len() == 1 && schema[0].is_empty() {
        return Err(Error::Ingestion {
            source_name: source_name.into(),
            line: 1,
            message: "missing header".into(),
        });
    }
    check_schema(&schema)?;
    let mut raw: Vec<Vec<String>> = vec![Vec::new(); schema.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Ingestion {
            source_name: source_name.into(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != schema.len() {
            return Err(Error::Ingestion {
                source_name: source_name.into(),
                line,
                message: format!("expected {} fields, found {}", schema.len(), rec.len()),
            });
        }
        for (c, field) in rec.iter().enumerate() {
            raw[c].push(field.to_string());
        }
    }
    Ok(Relation::from_raw_columns(name.to_string(), schema, raw))
}

fn check_on(left: &Relation, right: &Relation, on: &AttrSet) -> Result<(Vec<usize>, Vec<usize>)> {
    if on.is_empty() {
        return Err(Error::Argument("join attribute set is empty".into()));
    }
    for a in on.iter() {
        if !left.has_attr(a) || !right.has_attr(a) {
            return Err(Error::Argument(format!(
                "join attribute `{a}` is not shared by `{}` and `{}`",
                left.name(),
                right.name()
            )));
        }
    }
    Ok((left.indices_of(on)?, right.indices_of(on)?))
}

/// Attributes present in both schemas.
pub fn shared_attrs(left: &Relation, right: &Relation) -> AttrSet {
    left.attr_set().intersection(&right.attr_set())
}

fn has_null(key: &[Value]) -> bool {
    key.iter().any(Value::is_null)
}

/// Equi-join on `on`. Every other attribute must belong to one side only.
/// NULL never matches anything, NULL included.
pub fn equi_join(left: &Relation, right: &Relation, on: &AttrSet) -> Result<Relation> {
    let (lk, rk) = check_on(left, right, on)?;
    let extra = shared_attrs(left, right).difference(on);
    if !extra.is_empty() {
        return Err(Error::Argument(format!(
            "attributes {extra} are shared but not joined on"
        )));
    }
    let mut index: HashMap<Vec<Value>, Vec<usize>> = HashMap::new();
    for r in 0..right.n_rows() {
        let k = right.key(r, &rk);
        if !has_null(&k) {
            index.entry(k).or_default().push(r);
        }
    }
    let right_keep: Vec<usize> = (0..right.n_attrs()).filter(|i| !rk.contains(i)).collect();
    let mut schema = left.schema().to_vec();
    schema.extend(right_keep.iter().map(|&i| right.schema()[i].clone()));
    let mut columns: Vec<Vec<Value>> = vec![Vec::new(); schema.len()];
    for l in 0..left.n_rows() {
        let k = left.key(l, &lk);
        if let Some(matches) = index.get(&k) {
            for &r in matches {
                for c in 0..left.n_attrs() {
                    columns[c].push(left.value(l, c).clone());
                }
                for (j, &c) in right_keep.iter().enumerate() {
                    columns[left.n_attrs() + j].push(right.value(r, c).clone());
                }
            }
        }
    }
    let name = format!("{}+{}", left.name(), right.name());
    Ok(Relation::from_columns_unchecked(name, schema, columns))
}

/// Equi-join on every shared attribute.
pub fn natural_join(left: &Relation, right: &Relation) -> Result<Relation> {
    equi_join(left, right, &shared_attrs(left, right))
}

/// One cell of the outer-join key distribution. `None` on a side means no partner.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyPair {
    pub left: Option<Vec<Value>>,
    pub right: Option<Vec<Value>>,
    pub count: u64,
}

impl KeyPair {
    pub fn is_matched(&self) -> bool {
        self.left.is_some() && self.right.is_some()
    }
}

/// Frequencies of (left key, right key) pairs in the full outer join.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterJoinPairs {
    pub pairs: Vec<KeyPair>,
}

impl OuterJoinPairs {
    pub fn total(&self) -> u64 {
        self.pairs.iter().map(|p| p.count).sum()
    }

    pub fn matched_total(&self) -> u64 {
        self.pairs.iter().filter(|p| p.is_matched()).map(|p| p.count).sum()
    }
}

fn key_frequencies(rel: &Relation, cols: &[usize]) -> (Vec<Vec<Value>>, HashMap<Vec<Value>, u64>) {
    let mut order = Vec::new();
    let mut freq: HashMap<Vec<Value>, u64> = HashMap::new();
    for r in 0..rel.n_rows() {
        let k = rel.key(r, cols);
        let e = freq.entry(k.clone()).or_insert(0);
        if *e == 0 {
            order.push(k);
        }
        *e += 1;
    }
    (order, freq)
}

/// The key distribution of the full outer join without materializing it.
pub fn full_outer_join_pairs(left: &Relation, right: &Relation, on: &AttrSet) -> Result<OuterJoinPairs> {
    let (lk, rk) = check_on(left, right, on)?;
    let (lorder, lfreq) = key_frequencies(left, &lk);
    let (rorder, rfreq) = key_frequencies(right, &rk);
    let mut pairs = Vec::with_capacity(lorder.len() + rorder.len());
    for k in lorder {
        let fl = lfreq[&k];
        match rfreq.get(&k) {
            Some(&fr) if !has_null(&k) => pairs.push(KeyPair {
                left: Some(k.clone()),
                right: Some(k),
                count: fl * fr,
            }),
            _ => pairs.push(KeyPair { left: Some(k), right: None, count: fl }),
        }
    }
    for k in rorder {
        if has_null(&k) || !lfreq.contains_key(&k) {
            let fr = rfreq[&k];
            pairs.push(KeyPair { left: None, right: Some(k), count: fr });
        }
    }
    Ok(OuterJoinPairs { pairs })
}

/// Controlled inconsistency injection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirtSpec {
    pub fraction: f64,
    /// Relations to dirty. Empty means every relation.
    pub targets: Vec<String>,
    pub seed: u64,
}

impl DirtSpec {
    pub fn new(fraction: f64, seed: u64) -> Result<DirtSpec> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::Argument(format!("fraction {fraction} outside [0,1]")));
        }
        Ok(DirtSpec { fraction, targets: Vec::new(), seed })
    }

    pub fn applies_to(&self, name: &str) -> bool {
        self.targets.is_empty() || self.targets.iter().any(|t| t == name)
    }
}

/// Overwrites one FD right-hand-side cell in exactly `ceil(fraction * n)` rows.
pub fn inject_inconsistency(rel: &Relation, spec: &DirtSpec, fds: &[Fd]) -> Result<Relation> {
    if !(0.0..=1.0).contains(&spec.fraction) {
        return Err(Error::Argument(format!("fraction {} outside [0,1]", spec.fraction)));
    }
    let n = rel.n_rows();
    let count = (spec.fraction * n as f64 - 1e-9).ceil().max(0.0) as usize;
    if count > n {
        return Err(Error::Argument(format!("cannot modify {count} of {n} rows")));
    }
    if count == 0 || !spec.applies_to(rel.name()) {
        return Ok(rel.clone());
    }
    if fds.is_empty() {
        return Err(Error::Argument("no functional dependency to violate".into()));
    }
    let mut rhs_cols = Vec::with_capacity(fds.len());
    let mut domains: HashMap<usize, Vec<Value>> = HashMap::new();
    for fd in fds {
        fd.check(rel)?;
        let c = rel.index_of(&fd.rhs)?;
        rhs_cols.push(c);
        domains.entry(c).or_insert_with(|| {
            let mut seen = HashSet::new();
            rel.column(c)
                .iter()
                .filter(|v| !v.is_null() && seen.insert((*v).clone()))
                .cloned()
                .collect()
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rows = sample(&mut rng, n, count).into_vec();
    let mut out = rel.clone();
    for r in rows {
        let c = rhs_cols[rng.gen_range(0..rhs_cols.len())];
        let current = &rel.columns[c][r];
        let choices: Vec<&Value> = domains[&c].iter().filter(|v| *v != current).collect();
        if choices.is_empty() {
            return Err(Error::Argument(format!(
                "column `{}` has no alternative value to inject",
                rel.schema[c]
            )));
        }
        out.columns[c][r] = choices[rng.gen_range(0..choices.len())].clone();
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct Manifest {
    #[serde(default)]
    relations: BTreeMap<String, PathBuf>,
}

/// A set of uniquely named relations plus the attribute → relations index.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    relations: BTreeMap<String, Arc<Relation>>,
    index: BTreeMap<String, BTreeSet<String>>,
}

impl Catalog {
    pub fn new(relations: Vec<Relation>) -> Result<Catalog> {
        let mut cat = Catalog::default();
        for r in relations {
            cat.insert(r)?;
        }
        Ok(cat)
    }

    pub fn insert(&mut self, rel: Relation) -> Result<()> {
        if self.relations.contains_key(rel.name()) {
            return Err(Error::Schema(format!("duplicate relation `{}`", rel.name())));
        }
        for a in rel.schema() {
            self.index.entry(a.clone()).or_default().insert(rel.name().to_string());
        }
        self.relations.insert(rel.name().to_string(), Arc::new(rel));
        Ok(())
    }

    /// Loads every relation listed in a TOML manifest (`[relations] name = "file.csv"`).
    /// Relative paths resolve against the manifest's directory.
    pub fn from_manifest(path: impl AsRef<Path>) -> Result<Catalog> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let manifest: Manifest = toml::from_str(&text).map_err(|e| Error::Ingestion {
            source_name: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut rels = Vec::new();
        for (name, file) in manifest.relations {
            let full = if file.is_absolute() { file } else { base.join(file) };
            rels.push(load_csv(&full, &name)?);
        }
        Catalog::new(rels)
    }

    /// Writes every relation as `<name>.csv` plus a `manifest.toml` into `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut manifest = String::from("[relations]\n");
        for (name, rel) in &self.relations {
            let file = format!("{name}.csv");
            rel.write_csv(std::fs::File::create(dir.join(&file))?)?;
            manifest.push_str(&format!("{name} = \"{file}\"\n"));
        }
        let mpath = dir.join("manifest.toml");
        std::fs::write(&mpath, manifest)?;
        Ok(mpath)
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Arc<Relation>> {
        self.relations.get(name)
    }

    /// Relations in name order.
    pub fn relations(&self) -> impl Iterator<Item = &Arc<Relation>> {
        self.relations.values()
    }

    pub fn names(&self) -> Vec<String> {
        self.relations.keys().cloned().collect()
    }

    /// Names of the relations containing `attr`.
    pub fn holders(&self, attr: &str) -> Option<&BTreeSet<String>> {
        self.index.get(attr)
    }

    pub fn attribute_index(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.index
    }

    /// Applies [`inject_inconsistency`] to every targeted relation using its FD list.
    pub fn with_inconsistency(&self, spec: &DirtSpec, fds: &BTreeMap<String, Vec<Fd>>) -> Result<Catalog> {
        let mut rels = Vec::new();
        for (i, (name, rel)) in self.relations.iter().enumerate() {
            let list = fds.get(name).map(Vec::as_slice).unwrap_or(&[]);
            if spec.applies_to(name) && !list.is_empty() {
                let local = DirtSpec { seed: spec.seed.wrapping_add(i as u64), ..spec.clone() };
                rels.push(inject_inconsistency(rel, &local, list)?);
            } else {
                rels.push((**rel).clone());
            }
        }
        Catalog::new(rels)
    }
}
