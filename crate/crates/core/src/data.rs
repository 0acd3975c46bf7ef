//! Records, datasets, CSV ingestion and disjoint partitioning.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::schema::{FeatureKind, FeatureSchema, LabelId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureValue {
    Continuous(f64),
    /// Index into the feature's discrete value list.
    Discrete(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub values: Vec<FeatureValue>,
    pub label: LabelId,
}

/// Read-only access to a collection of records sharing one schema.
///
/// Everything that consumes private data goes through this trait, which is
/// what lets tests wrap a dataset in an [`AccessCounter`] and prove which
/// code paths touch records.
pub trait RecordSource: Sync {
    fn schema(&self) -> &FeatureSchema;
    fn len(&self) -> usize;
    fn record(&self, index: usize) -> &Record;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<S: RecordSource + ?Sized> RecordSource for &S {
    fn schema(&self) -> &FeatureSchema {
        (**self).schema()
    }
    fn len(&self) -> usize {
        (**self).len()
    }
    fn record(&self, index: usize) -> &Record {
        (**self).record(index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Arc<FeatureSchema>,
    records: Vec<Record>,
}

impl Dataset {
    /// Validate `records` against `schema`.
    pub fn new(schema: Arc<FeatureSchema>, records: Vec<Record>) -> Result<Self> {
        for (row, r) in records.iter().enumerate() {
            check_record(&schema, r, row + 1)?;
        }
        Ok(Dataset { schema, records })
    }

    pub fn schema_arc(&self) -> &Arc<FeatureSchema> {
        &self.schema
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn labels(&self) -> impl Iterator<Item = LabelId> + '_ {
        self.records.iter().map(|r| r.label)
    }
}

impl RecordSource for Dataset {
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }
    fn len(&self) -> usize {
        self.records.len()
    }
    fn record(&self, index: usize) -> &Record {
        &self.records[index]
    }
}

fn check_record(schema: &FeatureSchema, r: &Record, row: usize) -> Result<()> {
    if r.values.len() != schema.features().len() {
        return Err(Error::Dataset(format!(
            "row {row}: expected {} values, got {}",
            schema.features().len(),
            r.values.len()
        )));
    }
    for (spec, value) in schema.features().iter().zip(&r.values) {
        let bad = |message: String| Error::Record {
            row,
            feature: spec.name.clone(),
            message,
        };
        match (&spec.kind, value) {
            (FeatureKind::Continuous { lower, upper }, FeatureValue::Continuous(v)) => {
                if !(v.is_finite() && *lower <= *v && *v <= *upper) {
                    return Err(bad(format!("value {v} outside [{lower}, {upper}]")));
                }
            }
            (FeatureKind::Discrete { values }, FeatureValue::Discrete(i)) => {
                if *i >= values.len() {
                    return Err(bad(format!("discrete index {i} out of range")));
                }
            }
            _ => return Err(bad("value kind does not match schema".into())),
        }
    }
    if r.label >= schema.num_labels() {
        return Err(Error::Dataset(format!(
            "row {row}: label index {} out of range",
            r.label
        )));
    }
    Ok(())
}

/// A subset of a parent source selected by index.
#[derive(Debug, Clone, Copy)]
pub struct DatasetView<'a, S: ?Sized> {
    parent: &'a S,
    indices: &'a [usize],
}

impl<'a, S: RecordSource + ?Sized> DatasetView<'a, S> {
    pub fn new(parent: &'a S, indices: &'a [usize]) -> Self {
        debug_assert!(indices.iter().all(|&i| i < parent.len()));
        DatasetView { parent, indices }
    }

    pub fn indices(&self) -> &[usize] {
        self.indices
    }
}

impl<S: RecordSource + ?Sized> RecordSource for DatasetView<'_, S> {
    fn schema(&self) -> &FeatureSchema {
        self.parent.schema()
    }
    fn len(&self) -> usize {
        self.indices.len()
    }
    fn record(&self, index: usize) -> &Record {
        self.parent.record(self.indices[index])
    }
}

/// Wraps a source and counts record reads.
#[derive(Debug)]
pub struct AccessCounter<S> {
    inner: S,
    reads: AtomicUsize,
}

impl<S: RecordSource> AccessCounter<S> {
    pub fn new(inner: S) -> Self {
        AccessCounter {
            inner,
            reads: AtomicUsize::new(0),
        }
    }

    pub fn reads(&self) -> usize {
        self.reads.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.reads.store(0, Ordering::SeqCst);
    }
}

impl<S: RecordSource> RecordSource for AccessCounter<S> {
    fn schema(&self) -> &FeatureSchema {
        self.inner.schema()
    }
    fn len(&self) -> usize {
        self.inner.len()
    }
    fn record(&self, index: usize) -> &Record {
        self.reads.fetch_add(1, Ordering::SeqCst);
        self.inner.record(index)
    }
}

/// τ pairwise-disjoint index sets covering `0..parent_size`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisjointPartition {
    subsets: Vec<Vec<usize>>,
    parent_size: usize,
}

impl DisjointPartition {
    /// Shuffle `0..n` uniformly and cut it into `tau` contiguous blocks. The
    /// first `n % tau` blocks get one extra index.
    pub fn new<R: Rng + ?Sized>(n: usize, tau: usize, rng: &mut R) -> Result<Self> {
        if tau == 0 {
            return Err(Error::param("number of subsets must be at least 1"));
        }
        if tau > n {
            return Err(Error::param(format!(
                "cannot split {n} records into {tau} non-empty disjoint subsets"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let base = n / tau;
        let extra = n % tau;
        let mut subsets = Vec::with_capacity(tau);
        let mut start = 0;
        for i in 0..tau {
            let len = base + usize::from(i < extra);
            subsets.push(order[start..start + len].to_vec());
            start += len;
        }
        Ok(DisjointPartition {
            subsets,
            parent_size: n,
        })
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    pub fn parent_size(&self) -> usize {
        self.parent_size
    }

    pub fn view<'a, S: RecordSource + ?Sized>(
        &'a self,
        data: &'a S,
        i: usize,
    ) -> DatasetView<'a, S> {
        assert_eq!(
            data.len(),
            self.parent_size,
            "partition built for a different source"
        );
        DatasetView::new(data, &self.subsets[i])
    }
}

pub fn partition_disjoint<S: RecordSource + ?Sized, R: Rng + ?Sized>(
    data: &S,
    tau: usize,
    rng: &mut R,
) -> Result<DisjointPartition> {
    DisjointPartition::new(data.len(), tau, rng)
}

// ---------------------------------------------------------------------------
// CSV

fn column_positions(
    schema: &FeatureSchema,
    headers: &csv::StringRecord,
    need_label: bool,
) -> Result<(Vec<usize>, Option<usize>)> {
    let by_name: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let mut cols = Vec::with_capacity(schema.features().len());
    for f in schema.features() {
        match by_name.get(f.name.as_str()) {
            Some(&i) => cols.push(i),
            None => return Err(Error::Dataset(format!("missing column `{}`", f.name))),
        }
    }
    let label = by_name.get(schema.label_column()).copied();
    if need_label && label.is_none() {
        return Err(Error::Dataset(format!(
            "missing label column `{}`",
            schema.label_column()
        )));
    }
    Ok((cols, label))
}

fn parse_values(
    schema: &FeatureSchema,
    cols: &[usize],
    row: &csv::StringRecord,
    row_no: usize,
) -> Result<Vec<FeatureValue>> {
    let mut values = Vec::with_capacity(cols.len());
    for (spec, &c) in schema.features().iter().zip(cols) {
        let raw = row.get(c).unwrap_or("").trim();
        let bad = |message: String| Error::Record {
            row: row_no,
            feature: spec.name.clone(),
            message,
        };
        let v = match &spec.kind {
            FeatureKind::Continuous { lower, upper } => {
                let v: f64 = raw
                    .parse()
                    .map_err(|_| bad(format!("`{raw}` is not a number")))?;
                if !(v.is_finite() && *lower <= v && v <= *upper) {
                    return Err(bad(format!("value {v} outside [{lower}, {upper}]")));
                }
                FeatureValue::Continuous(v)
            }
            FeatureKind::Discrete { .. } => FeatureValue::Discrete(
                spec.value_index(raw)
                    .ok_or_else(|| bad(format!("unknown discrete value `{raw}`")))?,
            ),
        };
        values.push(v);
    }
    Ok(values)
}

fn csv_err(context: &str) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        context: context.to_string(),
        source,
    }
}

/// Parse a labelled CSV. Extra columns are ignored; row order is kept.
pub fn read_dataset<R: Read>(reader: R, schema: Arc<FeatureSchema>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_err("header"))?.clone();
    let (cols, label_col) = column_positions(&schema, &headers, true)?;
    let label_col = label_col.expect("checked above");
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(csv_err("dataset"))?;
        let values = parse_values(&schema, &cols, &row, row_no)?;
        let raw = row.get(label_col).unwrap_or("").trim();
        let label = schema.label_index(raw).ok_or_else(|| Error::Record {
            row: row_no,
            feature: schema.label_column().to_string(),
            message: format!("unknown class label `{raw}`"),
        })?;
        records.push(Record { values, label });
    }
    Ok(Dataset { schema, records })
}

pub fn load_dataset(path: impl AsRef<Path>, schema: Arc<FeatureSchema>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(std::io::BufReader::new(file), schema).map_err(|e| match e {
        Error::Dataset(m) => Error::Dataset(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub(crate) fn format_value(schema: &FeatureSchema, feature: usize, value: &FeatureValue) -> String {
    match (value, &schema.feature(feature).kind) {
        (FeatureValue::Continuous(v), _) => v.to_string(),
        (FeatureValue::Discrete(i), FeatureKind::Discrete { values }) => values[*i].clone(),
        (FeatureValue::Discrete(i), FeatureKind::Continuous { .. }) => i.to_string(),
    }
}

/// Emit a dataset in the same CSV layout `read_dataset` accepts.
pub fn write_dataset<S: RecordSource + ?Sized, W: Write>(data: &S, writer: W) -> Result<()> {
    let schema = data.schema();
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = schema.features().iter().map(|f| f.name.as_str()).collect();
    header.push(schema.label_column());
    wtr.write_record(&header).map_err(csv_err("write"))?;
    for i in 0..data.len() {
        let r = data.record(i);
        let mut row: Vec<String> = r
            .values
            .iter()
            .enumerate()
            .map(|(f, v)| format_value(schema, f, v))
            .collect();
        row.push(schema.label_name(r.label).to_string());
        wtr.write_record(&row).map_err(csv_err("write"))?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_dataset<S: RecordSource + ?Sized>(data: &S, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(data, std::io::BufWriter::new(file))
}

/// Rows read for prediction: the raw cells are kept so output can echo them.
#[derive(Debug, Clone)]
pub struct UnlabeledTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub values: Vec<Vec<FeatureValue>>,
}

/// Parse a CSV whose label column is optional.
pub fn load_unlabeled(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<UnlabeledTable> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err(&path.display().to_string()))?;
    let headers = rdr.headers().map_err(csv_err("header"))?.clone();
    let (cols, _) = column_positions(schema, &headers, false)?;
    let mut rows = Vec::new();
    let mut values = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(csv_err("dataset"))?;
        values.push(parse_values(schema, &cols, &row, i + 1)?);
        rows.push(row.iter().map(str::to_string).collect());
    }
    Ok(UnlabeledTable {
        headers: headers.iter().map(str::to_string).collect(),
        rows,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::schema::FeatureSpec;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn schema() -> Arc<FeatureSchema> {
        Arc::new(
            FeatureSchema::new(
                vec![
                    FeatureSpec::continuous("f1", 0.0, 1.0),
                    FeatureSpec::discrete("f2", ["a", "b"]),
                ],
                "class",
                vec!["Y".into(), "N".into()],
            )
            .unwrap(),
        )
    }

    #[test]
    fn loads_valid_rows() {
        let csv = "f1,f2,class\n0.1,a,Y\n0.5,b,N\n1,a,N\n";
        let d = read_dataset(csv.as_bytes(), schema()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.record(1).values[1], FeatureValue::Discrete(1));
        assert_eq!(d.record(2).label, 1);
    }

    #[test]
    fn column_order_is_free() {
        let csv = "class,f2,f1\nY,b,0.25\n";
        let d = read_dataset(csv.as_bytes(), schema()).unwrap();
        assert_eq!(
            d.record(0).values,
            vec![FeatureValue::Continuous(0.25), FeatureValue::Discrete(1)]
        );
    }

    #[test]
    fn unknown_discrete_value_names_row_and_feature() {
        let csv = "f1,f2,class\n0.1,a,Y\n0.2,c,Y\n";
        let err = read_dataset(csv.as_bytes(), schema()).unwrap_err();
        match err {
            Error::Record { row, feature, .. } => {
                assert_eq!(row, 2);
                assert_eq!(feature, "f2");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn out_of_bounds_is_an_error() {
        let csv = "f1,f2,class\n1.5,a,Y\n";
        let err = read_dataset(csv.as_bytes(), schema()).unwrap_err();
        assert!(err.to_string().contains("outside"), "{err}");
    }

    #[test]
    fn unknown_label_and_missing_column() {
        let err = read_dataset("f1,f2,class\n0.5,a,M\n".as_bytes(), schema()).unwrap_err();
        assert!(err.to_string().contains("unknown class label"));
        let err = read_dataset("f1,class\n0.5,Y\n".as_bytes(), schema()).unwrap_err();
        assert!(err.to_string().contains("missing column `f2`"));
        let err = read_dataset("f1,f2\n0.5,a\n".as_bytes(), schema()).unwrap_err();
        assert!(err.to_string().contains("missing label column"));
    }

    #[test]
    fn remainder_goes_to_first_subsets() {
        let mut r = rng::from_seed(1);
        let p = DisjointPartition::new(10, 3, &mut r).unwrap();
        let sizes: Vec<usize> = p.subsets().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
    }

    #[test]
    fn single_subset_is_whole_dataset() {
        let mut r = rng::from_seed(1);
        let p = DisjointPartition::new(6, 1, &mut r).unwrap();
        let mut all = p.subsets()[0].clone();
        all.sort_unstable();
        assert_eq!(all, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn partition_rejects_bad_tau() {
        let mut r = rng::from_seed(1);
        assert!(DisjointPartition::new(5, 0, &mut r).is_err());
        assert!(DisjointPartition::new(5, 6, &mut r).is_err());
    }

    #[test]
    fn seeds_change_the_permutation() {
        let a = DisjointPartition::new(1000, 10, &mut rng::from_seed(1)).unwrap();
        let b = DisjointPartition::new(1000, 10, &mut rng::from_seed(1)).unwrap();
        let c = DisjointPartition::new(1000, 10, &mut rng::from_seed(2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn counter_counts_reads_only() {
        let d = read_dataset("f1,f2,class\n0.1,a,Y\n0.5,b,N\n".as_bytes(), schema()).unwrap();
        let c = AccessCounter::new(&d);
        let _ = c.len();
        let _ = c.schema();
        assert_eq!(c.reads(), 0);
        let _ = c.record(1);
        assert_eq!(c.reads(), 1);
    }

    proptest! {
        #[test]
        fn partition_is_disjoint_and_covering(n in 1usize..400, tau_frac in 0.0f64..1.0, seed: u64) {
            let tau = 1 + ((n - 1) as f64 * tau_frac) as usize;
            let p = DisjointPartition::new(n, tau, &mut rng::from_seed(seed)).unwrap();
            prop_assert_eq!(p.len(), tau);
            let mut seen = HashSet::new();
            for s in p.subsets() {
                for &i in s {
                    prop_assert!(seen.insert(i));
                }
            }
            prop_assert_eq!(seen.len(), n);
            let min = p.subsets().iter().map(Vec::len).min().unwrap();
            let max = p.subsets().iter().map(Vec::len).max().unwrap();
            prop_assert!(max - min <= 1);
        }

        #[test]
        fn load_emit_round_trip(rows in prop::collection::vec((0.0f64..=1.0, 0usize..2, 0usize..2), 1..40)) {
            let schema = schema();
            let records: Vec<Record> = rows
                .iter()
                .map(|&(x, f2, label)| Record {
                    values: vec![FeatureValue::Continuous(x), FeatureValue::Discrete(f2)],
                    label,
                })
                .collect();
            let d = Dataset::new(schema.clone(), records).unwrap();
            let mut first = Vec::new();
            write_dataset(&d, &mut first).unwrap();
            let back = read_dataset(first.as_slice(), schema).unwrap();
            prop_assert_eq!(&back, &d);
            let mut second = Vec::new();
            write_dataset(&back, &mut second).unwrap();
            prop_assert_eq!(first, second);
        }
    }
}
