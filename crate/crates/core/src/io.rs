//! CSV readers and writers for every on-disk artifact.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which is enough
//! for any `f64` to survive a text round trip unchanged. Files may start with
//! `#key=value` metadata lines ahead of the header row.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::data::{DissimilarityMatrix, Embedding, FeatureTable, SimilarityMatrix, StimulusId};
use crate::error::{Error, Result};

/// Asymmetry below this is averaged away on load; above it the file is rejected.
pub const LOAD_SYMMETRY_TOL: f64 = 1e-6;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Splits leading `#key=value` lines off a CSV body.
pub(crate) fn split_metadata(text: &str) -> (Vec<(String, String)>, &str) {
    let mut meta = Vec::new();
    let mut rest = text;
    loop {
        let line_end = rest.find('\n').map(|p| p + 1).unwrap_or(rest.len());
        let line = rest[..line_end].trim();
        if let Some(kv) = line.strip_prefix('#') {
            if let Some((k, v)) = kv.split_once('=') {
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
            rest = &rest[line_end..];
            if rest.is_empty() {
                break;
            }
        } else {
            break;
        }
    }
    (meta, rest)
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    let mut s = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| Error::io(path, e))?;
    Ok(s)
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn reader(body: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes())
}

fn parse_f64(s: &str, row: usize, col: usize) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::MalformedCsv(format!("row {row}, column {col}: `{s}` is not a number")))
}

/// Reads an `id,<id1>,...,<idn>` square matrix.
fn read_square(body: &str) -> Result<(Vec<StimulusId>, DMatrix<f64>)> {
    let mut records = reader(body).into_records();
    let header = records
        .next()
        .ok_or_else(|| Error::MalformedCsv("missing header row".into()))??;
    if header.len() < 2 {
        return Err(Error::MalformedCsv("header has no stimulus ids".into()));
    }
    let ids = header
        .iter()
        .skip(1)
        .map(StimulusId::new)
        .collect::<Result<Vec<_>>>()?;
    let n = ids.len();
    let mut values = Vec::with_capacity(n * n);
    let mut rows = 0;
    for (r, rec) in records.enumerate() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != n + 1 {
            return Err(Error::NonSquare {
                rows: rec.len().saturating_sub(1),
                cols: n,
            });
        }
        if rows < n && rec[0] != *ids[rows].as_str() {
            return Err(Error::IdMismatch(format!(
                "row {} is labelled `{}` but column {} is `{}`",
                r + 1,
                &rec[0],
                rows + 1,
                ids[rows]
            )));
        }
        for (c, field) in rec.iter().skip(1).enumerate() {
            values.push(parse_f64(field, r + 1, c + 1)?);
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::NonSquare { rows, cols: n });
    }
    Ok((ids, DMatrix::from_row_slice(n, n, &values)))
}

pub fn load_dissimilarity_matrix(path: impl AsRef<Path>) -> Result<DissimilarityMatrix> {
    parse_dissimilarity_matrix(&read_text(path.as_ref())?)
}

pub fn parse_dissimilarity_matrix(text: &str) -> Result<DissimilarityMatrix> {
    let (_, body) = split_metadata(text);
    let (ids, values) = read_square(body)?;
    DissimilarityMatrix::with_symmetry_tolerance(ids, values, LOAD_SYMMETRY_TOL)
}

pub fn load_similarity_matrix(path: impl AsRef<Path>) -> Result<SimilarityMatrix> {
    let text = read_text(path.as_ref())?;
    let (_, body) = split_metadata(&text);
    let (ids, values) = read_square(body)?;
    let sym = (&values + values.transpose()) * 0.5;
    for i in 0..ids.len() {
        for j in (i + 1)..ids.len() {
            let diff = (values[(i, j)] - values[(j, i)]).abs();
            if diff > LOAD_SYMMETRY_TOL {
                return Err(Error::Asymmetric {
                    i,
                    j,
                    diff,
                    tol: LOAD_SYMMETRY_TOL,
                });
            }
        }
    }
    SimilarityMatrix::new(ids, sym)
}

pub fn write_square_matrix<W: Write>(
    mut w: W,
    ids: &[StimulusId],
    values: &DMatrix<f64>,
) -> Result<()> {
    let io = |e| Error::io("<matrix>", e);
    write!(w, "id").map_err(io)?;
    for id in ids {
        write!(w, ",{id}").map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    for (i, id) in ids.iter().enumerate() {
        write!(w, "{id}").map_err(io)?;
        for j in 0..ids.len() {
            write!(w, ",{}", fmt_f64(values[(i, j)])).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    Ok(())
}

pub fn write_dissimilarity_matrix(m: &DissimilarityMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    write_square_matrix(&mut w, m.ids(), m.values())?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn embedding_to_csv(e: &Embedding) -> String {
    let mut out = format!("#stress1={}\nid", fmt_f64(e.stress1()));
    for c in 0..e.dims() {
        out.push_str(&format!(",dim_{c}"));
    }
    out.push('\n');
    for (i, id) in e.ids().iter().enumerate() {
        out.push_str(id.as_str());
        for c in 0..e.dims() {
            out.push(',');
            out.push_str(&fmt_f64(e.coords()[(i, c)]));
        }
        out.push('\n');
    }
    out
}

pub fn write_embedding(e: &Embedding, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    w.write_all(embedding_to_csv(e).as_bytes())
        .and_then(|_| w.flush())
        .map_err(|err| Error::io(path, err))
}

pub fn load_embedding(path: impl AsRef<Path>) -> Result<Embedding> {
    parse_embedding(&read_text(path.as_ref())?)
}

pub fn parse_embedding(text: &str) -> Result<Embedding> {
    let (meta, body) = split_metadata(text);
    let stress1 = match meta.iter().find(|(k, _)| k == "stress1") {
        Some((_, v)) => v
            .parse::<f64>()
            .map_err(|_| Error::MalformedCsv(format!("bad stress1 metadata `{v}`")))?,
        None => 0.0,
    };
    let mut records = reader(body).into_records();
    let header = records
        .next()
        .ok_or_else(|| Error::MalformedCsv("missing header row".into()))??;
    let dims = header.len().saturating_sub(1);
    if dims == 0 {
        return Err(Error::MalformedCsv("embedding header has no dim_ columns".into()));
    }
    let mut ids = Vec::new();
    let mut flat = Vec::new();
    for (r, rec) in records.enumerate() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != dims + 1 {
            return Err(Error::MalformedCsv(format!(
                "row {} has {} coordinates, expected {dims}",
                r + 1,
                rec.len().saturating_sub(1)
            )));
        }
        ids.push(StimulusId::new(&rec[0])?);
        for (c, field) in rec.iter().skip(1).enumerate() {
            flat.push(parse_f64(field, r + 1, c + 1)?);
        }
    }
    if ids.is_empty() {
        return Err(Error::NoItems);
    }
    let coords = DMatrix::from_row_slice(ids.len(), dims, &flat);
    Embedding::new(ids, coords, stress1)
}

pub fn load_feature_table(path: impl AsRef<Path>) -> Result<FeatureTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_feature_table(BufReader::new(file))
}

pub fn parse_feature_table(text: &str) -> Result<FeatureTable> {
    read_feature_table(text.as_bytes())
}

fn read_feature_table<R: BufRead>(r: R) -> Result<FeatureTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(r);
    let mut records = rdr.records();
    let Some(header) = records.next() else {
        return Err(Error::NoItems);
    };
    let header = header?;
    if header.len() < 2 || &header[0] != "item_id" || &header[1] != "group_id" {
        return Err(Error::MalformedCsv(
            "feature header must start with `item_id,group_id`".into(),
        ));
    }
    let mut rows = Vec::new();
    for (r, rec) in records.enumerate() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() < 2 {
            return Err(Error::MalformedCsv(format!("row {} is missing group_id", r + 1)));
        }
        let feats = rec
            .iter()
            .skip(2)
            .enumerate()
            .map(|(c, f)| parse_f64(f, r + 1, c + 2))
            .collect::<Result<Vec<_>>>()?;
        rows.push((rec[0].to_string(), StimulusId::new(&rec[1])?, feats));
    }
    FeatureTable::from_rows(rows)
}

pub fn write_feature_table(t: &FeatureTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = create(path)?;
    write!(w, "item_id,group_id").map_err(io)?;
    for c in 0..t.width() {
        write!(w, ",f_{c}").map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    for i in 0..t.len() {
        write!(w, "{},{}", t.item_ids()[i], t.group_ids()[i]).map_err(io)?;
        for c in 0..t.width() {
            write!(w, ",{}", fmt_f64(t.features()[(i, c)])).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// One row of an augmentation manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub item_id: String,
    pub group_id: StimulusId,
    pub file_path: String,
}

pub fn write_manifest(entries: &[ManifestEntry], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let w = create(path)?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["item_id", "group_id", "file_path"])?;
    for e in entries {
        wtr.write_record([e.item_id.as_str(), e.group_id.as_str(), e.file_path.as_str()])?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["item_id", "group_id", "file_path"] {
        return Err(Error::MalformedCsv(
            "manifest header must be `item_id,group_id,file_path`".into(),
        ));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.push(ManifestEntry {
            item_id: rec[0].to_string(),
            group_id: StimulusId::new(&rec[1])?,
            file_path: rec[2].to_string(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_valid_matrix() {
        let m = parse_dissimilarity_matrix("id,a,b,c\na,0,1,1\nb,1,0,1\nc,1,1,0\n").unwrap();
        let names: Vec<_> = m.ids().iter().map(|s| s.as_str()).collect();
        assert_eq!(names, ["a", "b", "c"]);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.get(i, j), if i == j { 0.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn small_asymmetry_is_averaged() {
        let m = parse_dissimilarity_matrix("id,a,b,c\na,0,1.00000001,1\nb,1,0,1\nc,1,1,0\n")
            .unwrap();
        assert_eq!(m.get(0, 1), m.get(1, 0));
        assert!((m.get(0, 1) - 1.000000005).abs() < 1e-15);
    }

    #[test]
    fn large_asymmetry_is_rejected() {
        let err =
            parse_dissimilarity_matrix("id,a,b,c\na,0,1.1,1\nb,1,0,1\nc,1,1,0\n").unwrap_err();
        assert!(matches!(err, Error::Asymmetric { .. }));
    }

    #[test]
    fn nonzero_diagonal_is_rejected() {
        let err =
            parse_dissimilarity_matrix("id,a,b,c\na,0.5,1,1\nb,1,0,1\nc,1,1,0\n").unwrap_err();
        assert!(err.to_string().contains("nonzero diagonal"));
    }

    #[test]
    fn non_square_and_garbage() {
        assert!(matches!(
            parse_dissimilarity_matrix("id,a,b,c\na,0,1,1\nb,1,0,1\n"),
            Err(Error::NonSquare { .. })
        ));
        assert!(matches!(
            parse_dissimilarity_matrix("id,a,b,c\na,0,1\nb,1,0,1\nc,1,1,0\n"),
            Err(Error::NonSquare { .. })
        ));
        assert!(matches!(
            parse_dissimilarity_matrix("id,a,b,c\na,0,x,1\nb,1,0,1\nc,1,1,0\n"),
            Err(Error::MalformedCsv(_))
        ));
    }

    #[test]
    fn feature_table_errors() {
        let ragged = "item_id,group_id,f_0,f_1\nx,a,1,2\ny,a,1\n";
        assert!(parse_feature_table(ragged)
            .unwrap_err()
            .to_string()
            .contains("ragged feature width"));
        assert_eq!(parse_feature_table("").unwrap_err().to_string(), "no items");
        assert_eq!(
            parse_feature_table("item_id,group_id,f_0\n").unwrap_err().to_string(),
            "no items"
        );
    }

    #[test]
    fn metadata_lines_are_split() {
        let (meta, rest) = split_metadata("#a=1\n# b = x\nid,dim_0\n");
        assert_eq!(meta, vec![("a".into(), "1".into()), ("b".into(), "x".into())]);
        assert_eq!(rest, "id,dim_0\n");
    }
}
