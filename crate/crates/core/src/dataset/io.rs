use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use super::LabeledDataset;
use crate::error::{Error, Result};

/// CSV layout options.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsvOptions {
    /// Zero-based column holding the integer label.
    pub label_column: usize,
    /// Skip one header row.
    pub has_header: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            label_column: 0,
            has_header: false,
        }
    }
}

fn parse_label(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    // Exported tables often write labels as floats.
    let f = s.parse::<f64>().ok()?;
    (f.is_finite() && f.fract() == 0.0 && f.abs() < 9.0e15).then_some(f as i64)
}

/// Reads one point per row. Row order is preserved.
pub fn load_csv(path: impl AsRef<Path>, opts: CsvOptions) -> Result<LabeledDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::format(None, format!("{other:?}")),
        })?;

    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize);
            Error::format(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize);
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::format(
                    line,
                    format!("expected {w} fields, found {}", record.len()),
                ))
            }
            _ => {}
        }
        if opts.label_column >= record.len() {
            return Err(Error::format(
                line,
                format!("label column {} out of range", opts.label_column),
            ));
        }
        if record.len() < 2 {
            return Err(Error::format(line, "row has no feature columns"));
        }
        for (c, field) in record.iter().enumerate() {
            if c == opts.label_column {
                let label = parse_label(field)
                    .ok_or_else(|| Error::format(line, format!("bad label {field:?}")))?;
                labels.push(label);
            } else {
                let v: f64 = field
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| Error::format(line, format!("bad feature {field:?}")))?;
                points.push(v);
            }
        }
    }
    let Some(w) = width else {
        return Err(Error::format(None, "file contains no rows"));
    };
    LabeledDataset::from_flat(labels.len(), w - 1, points, labels)
}

/// Writes `label,x1,...,xd` rows without a header.
pub fn write_csv(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::format(None, format!("{other:?}")),
    })?;
    for i in 0..ds.n() {
        let mut row = Vec::with_capacity(ds.d() + 1);
        row.push(ds.label(i).to_string());
        row.extend(ds.point(i).iter().map(|v| format!("{v:?}")));
        w.write_record(&row)
            .map_err(|e| Error::format(None, e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// An IDX image/label pair after label filtering.
#[derive(Debug, Clone)]
pub struct IdxLoad {
    pub dataset: LabeledDataset,
    /// Image side lengths `(rows, cols)`.
    pub shape: (usize, usize),
    /// Rows in the files before filtering.
    pub total: usize,
    /// Retained rows per label.
    pub counts: BTreeMap<i64, usize>,
}

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<usize> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]) as usize)
        .ok_or_else(|| Error::format(None, format!("{what}: truncated header")))
}

/// Reads IDX images (magic `0x803`) and labels (magic `0x801`), keeping rows
/// whose label is in `keep` (all rows when `keep` is `None`). Pixels are
/// scaled to `[0, 1]` by `value / 255`.
pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    keep: Option<&[i64]>,
) -> Result<IdxLoad> {
    let images = fs::read(images_path.as_ref())?;
    let labels = fs::read(labels_path.as_ref())?;

    if be_u32(&images, 0, "images")? != 0x0803 {
        return Err(Error::format(None, "images: bad magic number"));
    }
    if be_u32(&labels, 0, "labels")? != 0x0801 {
        return Err(Error::format(None, "labels: bad magic number"));
    }
    let n = be_u32(&images, 4, "images")?;
    let rows = be_u32(&images, 8, "images")?;
    let cols = be_u32(&images, 12, "images")?;
    let n_labels = be_u32(&labels, 4, "labels")?;
    if n != n_labels {
        return Err(Error::format(
            None,
            format!("{n} images but {n_labels} labels"),
        ));
    }
    let px = rows * cols;
    if px == 0 {
        return Err(Error::format(None, "images: zero-sized images"));
    }
    if images.len() != 16 + n * px {
        return Err(Error::format(
            None,
            format!(
                "images: expected {} bytes, found {}",
                16 + n * px,
                images.len()
            ),
        ));
    }
    if labels.len() != 8 + n {
        return Err(Error::format(
            None,
            format!("labels: expected {} bytes, found {}", 8 + n, labels.len()),
        ));
    }

    let mut points = Vec::new();
    let mut kept = Vec::new();
    let mut counts = BTreeMap::new();
    for t in 0..n {
        let label = labels[8 + t] as i64;
        if keep.is_some_and(|k| !k.contains(&label)) {
            continue;
        }
        let start = 16 + t * px;
        points.extend(images[start..start + px].iter().map(|&b| b as f64 / 255.0));
        kept.push(label);
        *counts.entry(label).or_insert(0) += 1;
    }
    log::info!("loaded {} of {n} IDX rows", kept.len());
    Ok(IdxLoad {
        dataset: LabeledDataset::from_flat(kept.len(), px, points, kept)?,
        shape: (rows, cols),
        total: n,
        counts,
    })
}

/// `m_out × m_in` matrix whose row `o` averages the input interval
/// `[o·m_in/m_out, (o+1)·m_in/m_out)` weighted by overlap length.
fn area_weights(m_in: usize, m_out: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(m_out, m_in);
    let ratio = m_in as f64 / m_out as f64;
    for o in 0..m_out {
        let (lo, hi) = (o as f64 * ratio, (o + 1) as f64 * ratio);
        let first = lo.floor() as usize;
        let last = (hi.ceil() as usize).min(m_in);
        for i in first..last {
            let overlap = (hi.min((i + 1) as f64) - lo.max(i as f64)).max(0.0);
            w[(o, i)] = overlap / ratio;
        }
    }
    w
}

/// Area-weighted block averaging of square images from `side_in²` to
/// `side_out²` pixels.
pub fn downsample_images(
    ds: &LabeledDataset,
    side_in: usize,
    side_out: usize,
) -> Result<LabeledDataset> {
    if side_in * side_in != ds.d() {
        return Err(Error::invalid(format!(
            "dimension {} is not {side_in}²",
            ds.d()
        )));
    }
    if side_out == 0 || side_out > side_in {
        return Err(Error::invalid(format!(
            "cannot downsample side {side_in} to {side_out}"
        )));
    }
    let w = area_weights(side_in, side_out);
    let wt = w.transpose();
    let mut out = Vec::with_capacity(ds.n() * side_out * side_out);
    for t in 0..ds.n() {
        let img = DMatrix::from_row_slice(side_in, side_in, ds.point(t));
        let small = &w * img * &wt;
        for r in 0..side_out {
            for c in 0..side_out {
                out.push(small[(r, c)]);
            }
        }
    }
    LabeledDataset::from_flat(ds.n(), side_out * side_out, out, ds.labels().to_vec())
}

/// The same averaging along a single spectral axis.
pub fn downsample_spectra(ds: &LabeledDataset, d_out: usize) -> Result<LabeledDataset> {
    if d_out == 0 || d_out > ds.d() {
        return Err(Error::invalid(format!(
            "cannot downsample dimension {} to {d_out}",
            ds.d()
        )));
    }
    let w = area_weights(ds.d(), d_out);
    let mut out = Vec::with_capacity(ds.n() * d_out);
    for t in 0..ds.n() {
        let x = ds.point(t);
        for o in 0..d_out {
            out.push((0..ds.d()).map(|i| w[(o, i)] * x[i]).sum());
        }
    }
    LabeledDataset::from_flat(ds.n(), d_out, out, ds.labels().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, body: &[u8]) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::File::create(&p).unwrap().write_all(body).unwrap();
        p
    }

    #[test]
    fn csv_basic() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", b"1,0.0,1.0\n2,3.0,4.0\n");
        let ds = load_csv(&p, CsvOptions::default()).unwrap();
        assert_eq!((ds.n(), ds.d()), (2, 2));
        assert_eq!(ds.labels(), &[1, 2]);
        assert_eq!(ds.point(1), &[3.0, 4.0]);
    }

    #[test]
    fn csv_header_and_label_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", b"x,y,label\n0.5,1.5,3\n2,2,4\n");
        let opts = CsvOptions {
            label_column: 2,
            has_header: true,
        };
        let ds = load_csv(&p, opts).unwrap();
        assert_eq!(ds.labels(), &[3, 4]);
        assert_eq!(ds.point(0), &[0.5, 1.5]);
    }

    #[test]
    fn csv_errors() {
        let dir = tempfile::tempdir().unwrap();
        let empty = write(&dir, "e.csv", b"");
        assert!(matches!(
            load_csv(&empty, CsvOptions::default()),
            Err(Error::Format { .. })
        ));
        let bad = write(&dir, "b.csv", b"1,0.0\n2,abc\n");
        match load_csv(&bad, CsvOptions::default()) {
            Err(Error::Format { line, .. }) => assert_eq!(line, Some(2)),
            other => panic!("unexpected {other:?}"),
        }
        let ragged = write(&dir, "r.csv", b"1,0.0,1.0\n2,3.0\n");
        match load_csv(&ragged, CsvOptions::default()) {
            Err(Error::Format { line, .. }) => assert_eq!(line, Some(2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = LabeledDataset::from_rows(&[vec![0.1, -2.5e-7], vec![1.0 / 3.0, 4.0]], vec![0, 1])
            .unwrap();
        let p = dir.path().join("out.csv");
        write_csv(&ds, &p).unwrap();
        assert_eq!(load_csv(&p, CsvOptions::default()).unwrap(), ds);
    }

    fn idx_files(
        dir: &tempfile::TempDir,
        labels: &[u8],
        truncate: bool,
    ) -> (std::path::PathBuf, std::path::PathBuf) {
        let n = labels.len() as u32;
        let mut img = Vec::new();
        img.extend(0x803u32.to_be_bytes());
        img.extend(n.to_be_bytes());
        img.extend(2u32.to_be_bytes());
        img.extend(2u32.to_be_bytes());
        for t in 0..n {
            img.extend([0u8, 255, t as u8, 51]);
        }
        if truncate {
            img.pop();
        }
        let mut lab = Vec::new();
        lab.extend(0x801u32.to_be_bytes());
        lab.extend(n.to_be_bytes());
        lab.extend_from_slice(labels);
        (write(dir, "img", &img), write(dir, "lab", &lab))
    }

    #[test]
    fn idx_load_and_filter() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = idx_files(&dir, &[4, 1, 9, 4], false);
        let all = load_idx(&img, &lab, None).unwrap();
        assert_eq!(all.total, 4);
        assert_eq!(all.dataset.n(), 4);
        assert_eq!(all.shape, (2, 2));
        assert_eq!(all.dataset.point(0), &[0.0, 1.0, 0.0, 0.2]);

        let some = load_idx(&img, &lab, Some(&[4, 9])).unwrap();
        assert_eq!(some.dataset.labels(), &[4, 9, 4]);
        assert_eq!(some.counts[&4], 2);
    }

    #[test]
    fn idx_truncated_or_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = idx_files(&dir, &[1, 2], true);
        assert!(matches!(
            load_idx(&img, &lab, None),
            Err(Error::Format { .. })
        ));
        assert!(matches!(
            load_idx(&lab, &img, None),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn downsampling() {
        let ds = LabeledDataset::from_rows(&[vec![0.0, 0.0, 1.0, 1.0]], vec![1]).unwrap();
        let out = downsample_images(&ds, 2, 1).unwrap();
        assert_eq!(out.point(0), &[0.5]);

        let c = LabeledDataset::from_flat(1, 784, vec![0.37; 784], vec![0]).unwrap();
        let out = downsample_images(&c, 28, 10).unwrap();
        assert_eq!(out.d(), 100);
        assert!(out.point(0).iter().all(|v| (v - 0.37).abs() < 1e-12));

        let spec = LabeledDataset::from_flat(1, 200, (0..200).map(|v| v as f64).collect(), vec![0])
            .unwrap();
        let out = downsample_spectra(&spec, 100).unwrap();
        assert_eq!(out.d(), 100);
        assert!((out.point(0)[0] - 0.5).abs() < 1e-12);

        assert!(downsample_images(&ds, 3, 1).is_err());
        assert!(downsample_images(&ds, 2, 3).is_err());
    }
}
