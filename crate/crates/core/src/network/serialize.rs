//! Versioned text model format.
//!
//! ```text
//! #blstm-model 1
//! dims vocab=V embedding=d hidden=H layers=L tags=m
//! meta <key> <value>            (any number)
//! section <name> <line count>   (any number, followed by that many lines)
//! block <name> <rows> <cols>    (one per parameter block, rows on lines)
//! end
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so parsing a
//! written file reproduces every parameter bit for bit.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{ModelDims, ModelParams};
use crate::error::{Error, Result};

pub const MAGIC: &str = "#blstm-model";
pub const FORMAT_VERSION: u32 = 1;

/// Parameters plus free-form metadata and named text sections.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub params: ModelParams,
    pub meta: Vec<(String, String)>,
    pub sections: Vec<(String, Vec<String>)>,
}

impl ModelFile {
    pub fn new(params: ModelParams) -> Self {
        ModelFile {
            params,
            meta: Vec::new(),
            sections: Vec::new(),
        }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn section(&self, name: &str) -> Option<&[String]> {
        self.sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, lines)| lines.as_slice())
    }
}

pub fn write_model_file(file: &ModelFile) -> Result<String> {
    let d = file.params.dims();
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {FORMAT_VERSION}");
    let _ = writeln!(
        out,
        "dims vocab={} embedding={} hidden={} layers={} tags={}",
        d.vocab_size, d.embedding_dim, d.hidden_size, d.layers, d.tags
    );
    for (k, v) in &file.meta {
        if k.is_empty() || k.contains(char::is_whitespace) || v.contains('\n') {
            return Err(Error::invalid(format!(
                "meta entry {k:?} cannot be written"
            )));
        }
        let _ = writeln!(out, "meta {k} {v}");
    }
    for (name, lines) in &file.sections {
        if name.is_empty()
            || name.contains(char::is_whitespace)
            || lines.iter().any(|l| l.contains('\n'))
        {
            return Err(Error::invalid(format!(
                "section {name:?} cannot be written"
            )));
        }
        let _ = writeln!(out, "section {name} {}", lines.len());
        for l in lines {
            out.push_str(l);
            out.push('\n');
        }
    }
    for ((name, values), (_, rows, cols)) in file
        .params
        .named_blocks()
        .into_iter()
        .zip(ModelParams::block_shapes(d))
    {
        let _ = writeln!(out, "block {name} {rows} {cols}");
        for r in 0..rows {
            let row = &values[r * cols..(r + 1) * cols];
            for (c, v) in row.iter().enumerate() {
                if c > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{v:?}");
            }
            out.push('\n');
        }
    }
    out.push_str("end\n");
    Ok(out)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.inner.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok((i + 1, l.trim_end_matches('\r')))
            }
            None => Err(Error::parse(
                self.last + 1,
                format!("truncated file: expected {what}"),
            )),
        }
    }
}

fn parse_dims(line: usize, text: &str) -> Result<ModelDims> {
    let rest = text
        .strip_prefix("dims ")
        .ok_or_else(|| Error::parse(line, "expected dims line"))?;
    let mut fields = HashMap::new();
    for kv in rest.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::parse(line, format!("malformed dims field {kv:?}")))?;
        let v: usize = v
            .parse()
            .map_err(|_| Error::parse(line, format!("dims field {k} is not a count")))?;
        fields.insert(k, v);
    }
    let get = |k: &str| {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| Error::parse(line, format!("dims line lacks field {k}")))
    };
    let dims = ModelDims {
        vocab_size: get("vocab")?,
        embedding_dim: get("embedding")?,
        hidden_size: get("hidden")?,
        layers: get("layers")?,
        tags: get("tags")?,
    };
    dims.validate()?;
    Ok(dims)
}

pub fn parse_model_file(text: &str) -> Result<ModelFile> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let (n, header) = lines.next("header")?;
    let version = header
        .strip_prefix(MAGIC)
        .map(str::trim)
        .ok_or_else(|| Error::parse(n, "not a model file (missing header)"))?;
    if version != FORMAT_VERSION.to_string() {
        return Err(Error::Format(format!(
            "unsupported version {version:?}, this build reads version {FORMAT_VERSION}"
        )));
    }
    let (n, dims_line) = lines.next("dims line")?;
    let dims = parse_dims(n, dims_line)?;
    let shapes = ModelParams::block_shapes(dims);
    let expected: HashMap<&str, (usize, usize)> = shapes
        .iter()
        .map(|(name, r, c)| (name.as_str(), (*r, *c)))
        .collect();

    let mut meta = Vec::new();
    let mut sections = Vec::new();
    let mut blocks: HashMap<String, Vec<f64>> = HashMap::new();
    loop {
        let (n, line) = lines.next("end marker")?;
        let mut parts = line.splitn(2, ' ');
        let kind = parts.next().unwrap_or("");
        let rest = parts.next().unwrap_or("");
        match kind {
            "end" => break,
            "meta" => {
                let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                meta.push((k.to_string(), v.to_string()));
            }
            "section" => {
                let (name, count) = rest
                    .split_once(' ')
                    .ok_or_else(|| Error::parse(n, "malformed section header"))?;
                let count: usize = count
                    .parse()
                    .map_err(|_| Error::parse(n, format!("section {name} has a bad line count")))?;
                let mut body = Vec::with_capacity(count);
                for _ in 0..count {
                    body.push(
                        lines
                            .next(&format!("line of section {name}"))?
                            .1
                            .to_string(),
                    );
                }
                sections.push((name.to_string(), body));
            }
            "block" => {
                let f: Vec<&str> = rest.split_whitespace().collect();
                if f.len() != 3 {
                    return Err(Error::parse(n, "malformed block header"));
                }
                let name = f[0];
                let (rows, cols) = match (f[1].parse::<usize>(), f[2].parse::<usize>()) {
                    (Ok(r), Ok(c)) => (r, c),
                    _ => return Err(Error::parse(n, format!("block {name} has a bad shape"))),
                };
                let want = expected
                    .get(name)
                    .ok_or_else(|| Error::parse(n, format!("unexpected block {name}")))?;
                if *want != (rows, cols) {
                    return Err(Error::Format(format!(
                        "block {name} is {rows}x{cols}, dims require {}x{}",
                        want.0, want.1
                    )));
                }
                let mut data = Vec::with_capacity(rows * cols);
                for r in 0..rows {
                    let (ln, row) = lines.next(&format!("row {r} of block {name}"))?;
                    let before = data.len();
                    for tok in row.split_whitespace() {
                        let v: f64 = tok.parse().map_err(|_| {
                            Error::parse(ln, format!("block {name}: bad number {tok:?}"))
                        })?;
                        if !v.is_finite() {
                            return Err(Error::parse(
                                ln,
                                format!("block {name}: non-finite value"),
                            ));
                        }
                        data.push(v);
                    }
                    if data.len() - before != cols {
                        return Err(Error::parse(
                            ln,
                            format!(
                                "block {name}: row {r} has {} values, expected {cols}",
                                data.len() - before
                            ),
                        ));
                    }
                }
                if blocks.insert(name.to_string(), data).is_some() {
                    return Err(Error::parse(n, format!("duplicate block {name}")));
                }
            }
            _ => return Err(Error::parse(n, format!("unknown record {kind:?}"))),
        }
    }

    let mut params = ModelParams::zeros(dims)?;
    let mut flat = Vec::new();
    for (name, _, _) in &shapes {
        let data = blocks
            .remove(name.as_str())
            .ok_or_else(|| Error::Format(format!("missing block {name}")))?;
        flat.extend(data);
    }
    params.set_flat(&flat)?;
    Ok(ModelFile {
        params,
        meta,
        sections,
    })
}

/// Writes a parameters-only model file.
pub fn save_model(model: &ModelParams, path: &Path) -> Result<()> {
    let text = write_model_file(&ModelFile::new(model.clone()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads the parameters from any model file, ignoring metadata and sections.
pub fn load_model(path: &Path) -> Result<ModelParams> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model_file(&text).map(|f| f.params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;

    fn model(layers: usize) -> ModelParams {
        let dims = ModelDims {
            vocab_size: 5,
            embedding_dim: 3,
            hidden_size: 2,
            layers,
            tags: 3,
        };
        ModelParams::random_in(dims, 1.0, &mut SeededRng::new(31)).unwrap()
    }

    fn bits(m: &ModelParams) -> Vec<u64> {
        m.to_flat().iter().map(|v| v.to_bits()).collect()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut m = model(2);
        m.embedding.set(0, 0, 1e-300);
        m.embedding.set(0, 1, -0.0);
        m.embedding.set(0, 2, 0.1 + 0.2);
        let mut f = ModelFile::new(m.clone());
        f.meta.push(("scheme".into(), "iobes".into()));
        f.sections
            .push(("tags".into(), vec!["A".into(), "B".into(), "C".into()]));
        let back = parse_model_file(&write_model_file(&f).unwrap()).unwrap();
        assert_eq!(bits(&back.params), bits(&m));
        assert_eq!(back.meta("scheme"), Some("iobes"));
        assert_eq!(back.section("tags").unwrap().len(), 3);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        let m = model(1);
        save_model(&m, &path).unwrap();
        assert_eq!(bits(&load_model(&path).unwrap()), bits(&m));
    }

    #[test]
    fn truncated_file() {
        let text = write_model_file(&ModelFile::new(model(1))).unwrap();
        let cut = &text[..text.len() / 2];
        let err = parse_model_file(cut).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn missing_layer_block_is_named() {
        // a 1-layer body under a header claiming 2 layers
        let text = write_model_file(&ModelFile::new(model(1))).unwrap();
        let text = text.replace("layers=1", "layers=2");
        let err = parse_model_file(&text).unwrap_err().to_string();
        assert!(
            err.contains("missing block layer1.forward.wx_input"),
            "{err}"
        );
    }

    #[test]
    fn version_mismatch() {
        let text = write_model_file(&ModelFile::new(model(1))).unwrap();
        let err =
            parse_model_file(&text.replacen("#blstm-model 1", "#blstm-model 9", 1)).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }

    #[test]
    fn corrupted_shape_names_field() {
        let text = write_model_file(&ModelFile::new(model(1))).unwrap();
        let err = parse_model_file(&text.replace("block output.bias 1 3", "block output.bias 1 4"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("output.bias"), "{err}");
    }

    #[test]
    fn short_row_reports_line() {
        let text = write_model_file(&ModelFile::new(model(1))).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let idx = lines
            .iter()
            .position(|l| l.starts_with("block embedding"))
            .unwrap()
            + 1;
        lines[idx] = lines[idx].rsplit_once(' ').unwrap().0.to_string();
        let err = parse_model_file(&lines.join("\n")).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, idx + 1),
            other => panic!("{other}"),
        }
    }
}
