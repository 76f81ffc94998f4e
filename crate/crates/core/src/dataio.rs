//! CSV ingestion, embedding output and SVG scatter plots.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::data::{DataMatrix, Embedding};
use crate::error::{Error, Result};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads a numeric CSV (rows are points) into a [`DataMatrix`].
pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<DataMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    parse_csv(file, has_header)
}

/// Same as [`load_csv`] but from any reader.
pub fn parse_csv<R: std::io::Read>(reader: R, has_header: bool) -> Result<DataMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut values = Vec::new();
    let mut width: Option<usize> = None;
    let mut n = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {w} columns, found {}", record.len()),
                })
            }
            Some(_) => {}
        }
        for cell in record.iter() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                message: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite value: {cell:?}"),
                });
            }
            values.push(v);
        }
        n += 1;
    }
    if n < 2 {
        return Err(Error::DatasetTooSmall { n });
    }
    DataMatrix::new(n, width.unwrap_or(0), values)
}

/// Reads one integer label per line. Blank lines are skipped.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<i64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(idx, l)| {
            l.trim().parse::<i64>().map_err(|_| Error::Parse {
                line: idx as u64 + 1,
                message: format!("not an integer label: {:?}", l.trim()),
            })
        })
        .collect()
}

/// Writes one CSV row per point using the shortest decimal form that
/// parses back to the same `f64`.
pub fn write_embedding(emb: &Embedding, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    out.write_all(embedding_csv(emb).as_bytes())
        .and_then(|_| out.flush())
        .map_err(io_err(path))
}

/// The CSV text produced by [`write_embedding`].
pub fn embedding_csv(emb: &Embedding) -> String {
    let mut s = String::with_capacity(emb.n() * emb.p() * 20);
    for point in emb.points() {
        for (c, v) in point.iter().enumerate() {
            if c > 0 {
                s.push(',');
            }
            write!(s, "{v}").unwrap();
        }
        s.push('\n');
    }
    s
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

const CANVAS: f64 = 800.0;

/// Renders a 2-D embedding as an SVG scatter plot.
pub fn scatter_svg(emb: &Embedding, labels: Option<&[i64]>) -> Result<String> {
    if emb.p() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: emb.p(),
        });
    }
    if let Some(l) = labels {
        if l.len() != emb.n() {
            return Err(Error::Dimension {
                expected: emb.n(),
                got: l.len(),
            });
        }
    }
    let (x_lo, x_hi) = padded_range(emb.points().map(|p| p[0]));
    let (y_lo, y_hi) = padded_range(emb.points().map(|p| p[1]));

    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CANVAS}\" height=\"{CANVAS}\" viewBox=\"0 0 {CANVAS} {CANVAS}\">"
    )
    .unwrap();
    writeln!(
        s,
        "<rect width=\"{CANVAS}\" height=\"{CANVAS}\" fill=\"white\"/>"
    )
    .unwrap();
    for (i, p) in emb.points().enumerate() {
        let cx = (p[0] - x_lo) / (x_hi - x_lo) * CANVAS;
        // SVG y grows downwards.
        let cy = (y_hi - p[1]) / (y_hi - y_lo) * CANVAS;
        let color = match labels {
            Some(l) => PALETTE[l[i].rem_euclid(PALETTE.len() as i64) as usize],
            None => PALETTE[0],
        };
        writeln!(
            s,
            "<circle cx=\"{cx:.3}\" cy=\"{cy:.3}\" r=\"3\" fill=\"{color}\" fill-opacity=\"0.8\"/>"
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Writes [`scatter_svg`] output to `path`.
pub fn emit_scatter_svg(
    emb: &Embedding,
    labels: Option<&[i64]>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let svg = scatter_svg(emb, labels)?;
    std::fs::write(path, svg).map_err(io_err(path))
}

/// Data range widened by 5% on each side; a zero-width range becomes a
/// unit-width box centred on the value.
fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        return (-0.5, 0.5);
    }
    let width = hi - lo;
    if width <= 0.0 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo - 0.05 * width, hi + 0.05 * width)
}
