//! Self-describing model checkpoint: versioned magic header, config
//! fields, scaler parameters, and dimension-tagged parameter blocks.
//!
//! Floats are written in shortest round-trip form, so saving and loading
//! reproduce the exact parameter bits and two identical runs produce
//! byte-identical files.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{ModelRole, PipelineError, SequenceModel};
use crate::dataset::{MinMaxScaler, WindowSpec};
use crate::nn::{ModelConfig, SequenceNet};
use crate::schema::Domain;

pub const CHECKPOINT_MAGIC: &str = "carbontwin-checkpoint v1";

fn join_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn save_checkpoint(
    model: &SequenceModel,
    path: impl AsRef<Path>,
    provenance: &[String],
) -> Result<(), PipelineError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "{CHECKPOINT_MAGIC}")?;
    for line in provenance {
        writeln!(w, "# {line}")?;
    }
    let cfg = &model.net.config;
    writeln!(w, "role = {}", model.role.as_str())?;
    writeln!(w, "domain = {}", model.domain)?;
    writeln!(w, "vehicle = {}", model.vehicle)?;
    writeln!(w, "seed = {}", model.seed)?;
    writeln!(w, "window_len = {}", model.window.length)?;
    writeln!(w, "window_stride = {}", model.window.stride)?;
    writeln!(w, "input_dim = {}", cfg.input_dim)?;
    writeln!(w, "hidden_units = {}", cfg.hidden_units)?;
    writeln!(w, "lstm_layers = {}", cfg.lstm_layers)?;
    writeln!(w, "head_units = {}", cfg.head_units)?;
    writeln!(w, "output_dim = {}", cfg.output_dim)?;
    writeln!(
        w,
        "[scaler input min] {}",
        join_floats(model.input_scaler.mins())
    )?;
    writeln!(
        w,
        "[scaler input max] {}",
        join_floats(model.input_scaler.maxs())
    )?;
    writeln!(
        w,
        "[scaler target min] {}",
        join_floats(model.target_scaler.mins())
    )?;
    writeln!(
        w,
        "[scaler target max] {}",
        join_floats(model.target_scaler.maxs())
    )?;
    for (l, layer) in model.net.layers.iter().enumerate() {
        let rows = 4 * layer.hidden;
        write_param(
            &mut w,
            &format!("lstm{l}.w_ih"),
            rows,
            layer.input_dim,
            &layer.w_ih,
        )?;
        write_param(
            &mut w,
            &format!("lstm{l}.w_hh"),
            rows,
            layer.hidden,
            &layer.w_hh,
        )?;
        write_param(&mut w, &format!("lstm{l}.bias"), 1, rows, &layer.bias)?;
    }
    let head = &model.net.head;
    write_param(&mut w, "head.w1", head.head_units, head.hidden, &head.w1)?;
    write_param(&mut w, "head.b1", 1, head.head_units, &head.b1)?;
    write_param(
        &mut w,
        "head.w2",
        head.output_dim,
        head.head_units,
        &head.w2,
    )?;
    write_param(&mut w, "head.b2", 1, head.output_dim, &head.b2)?;
    w.flush()?;
    Ok(())
}

fn write_param<W: Write>(
    w: &mut W,
    name: &str,
    rows: usize,
    cols: usize,
    values: &[f64],
) -> Result<(), PipelineError> {
    debug_assert_eq!(values.len(), rows * cols);
    writeln!(w, "[param {name} {rows} {cols}]")?;
    for r in 0..rows {
        writeln!(w, "{}", join_floats(&values[r * cols..(r + 1) * cols]))?;
    }
    Ok(())
}

struct Parser {
    lines: Vec<String>,
    pos: usize,
}

impl Parser {
    fn next_line(&mut self) -> Option<&str> {
        while self.pos < self.lines.len() {
            let line = &self.lines[self.pos];
            self.pos += 1;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            return Some(line);
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<&str, PipelineError> {
        self.next_line().ok_or_else(|| {
            PipelineError::Checkpoint(format!("unexpected end of file, wanted {what}"))
        })
    }

    fn key_value(&mut self, key: &str) -> Result<String, PipelineError> {
        let line = self.expect(key)?;
        let (k, v) = line.split_once('=').ok_or_else(|| {
            PipelineError::Checkpoint(format!("expected `{key} = ...`, got `{line}`"))
        })?;
        if k.trim() != key {
            return Err(PipelineError::Checkpoint(format!(
                "expected key `{key}`, got `{}`",
                k.trim()
            )));
        }
        Ok(v.trim().to_string())
    }

    fn usize_value(&mut self, key: &str) -> Result<usize, PipelineError> {
        self.key_value(key)?
            .parse()
            .map_err(|_| PipelineError::Checkpoint(format!("bad count for `{key}`")))
    }

    fn tagged_floats(&mut self, tag: &str) -> Result<Vec<f64>, PipelineError> {
        let line = self.expect(tag)?;
        let prefix = format!("[{tag}]");
        let rest = line.strip_prefix(&prefix).ok_or_else(|| {
            PipelineError::Checkpoint(format!("expected `{prefix}`, got `{line}`"))
        })?;
        parse_floats(rest)
    }

    fn param_block(&mut self, name: &str) -> Result<(usize, usize, Vec<f64>), PipelineError> {
        let header = self.expect("param header")?.to_string();
        let inner = header
            .strip_prefix("[param ")
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(|| {
                PipelineError::Checkpoint(format!("expected param block, got `{header}`"))
            })?;
        let mut parts = inner.split_whitespace();
        let got_name = parts.next().unwrap_or_default();
        if got_name != name {
            return Err(PipelineError::Checkpoint(format!(
                "expected param `{name}`, got `{got_name}`"
            )));
        }
        let rows: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PipelineError::Checkpoint(format!("bad rows in `{header}`")))?;
        let cols: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PipelineError::Checkpoint(format!("bad cols in `{header}`")))?;
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = self.expect("param row")?;
            let row = parse_floats(line)?;
            if row.len() != cols {
                return Err(PipelineError::Checkpoint(format!(
                    "param `{name}` row has {} values, expected {cols}",
                    row.len()
                )));
            }
            values.extend(row);
        }
        Ok((rows, cols, values))
    }
}

fn parse_floats(s: &str) -> Result<Vec<f64>, PipelineError> {
    s.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| PipelineError::Checkpoint(format!("bad float `{tok}`")))
        })
        .collect()
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<SequenceModel, PipelineError> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let lines: Vec<String> = reader.lines().collect::<Result<_, _>>()?;
    if lines.first().map(|l| l.as_str()) != Some(CHECKPOINT_MAGIC) {
        return Err(PipelineError::Checkpoint(format!(
            "missing magic header `{CHECKPOINT_MAGIC}`"
        )));
    }
    let mut p = Parser { lines, pos: 1 };

    let role_s = p.key_value("role")?;
    let role = ModelRole::parse(&role_s)
        .ok_or_else(|| PipelineError::Checkpoint(format!("unknown role `{role_s}`")))?;
    let domain_s = p.key_value("domain")?;
    let domain = Domain::parse(&domain_s)
        .ok_or_else(|| PipelineError::Checkpoint(format!("unknown domain `{domain_s}`")))?;
    let vehicle = p.key_value("vehicle")?;
    let seed: u64 = p
        .key_value("seed")?
        .parse()
        .map_err(|_| PipelineError::Checkpoint("bad seed".to_string()))?;
    let window = WindowSpec {
        length: p.usize_value("window_len")?,
        stride: p.usize_value("window_stride")?,
    };
    let cfg = ModelConfig {
        input_dim: p.usize_value("input_dim")?,
        hidden_units: p.usize_value("hidden_units")?,
        lstm_layers: p.usize_value("lstm_layers")?,
        head_units: p.usize_value("head_units")?,
        output_dim: p.usize_value("output_dim")?,
        window_len: window.length,
        seed,
    };
    cfg.validate()?;

    let input_min = p.tagged_floats("scaler input min")?;
    let input_max = p.tagged_floats("scaler input max")?;
    let target_min = p.tagged_floats("scaler target min")?;
    let target_max = p.tagged_floats("scaler target max")?;
    if input_min.len() != cfg.input_dim || input_max.len() != cfg.input_dim {
        return Err(PipelineError::Checkpoint(format!(
            "input scaler has {} channels, model expects {}",
            input_min.len(),
            cfg.input_dim
        )));
    }
    if target_min.len() != cfg.output_dim || target_max.len() != cfg.output_dim {
        return Err(PipelineError::Checkpoint(format!(
            "target scaler has {} channels, model expects {}",
            target_min.len(),
            cfg.output_dim
        )));
    }

    // start from a shape-correct net, then overwrite every block
    let mut net = SequenceNet::init(&cfg)?;
    for l in 0..cfg.lstm_layers {
        let expect_in = if l == 0 {
            cfg.input_dim
        } else {
            cfg.hidden_units
        };
        let (rows, cols, w_ih) = p.param_block(&format!("lstm{l}.w_ih"))?;
        if rows != 4 * cfg.hidden_units || cols != expect_in {
            return Err(PipelineError::Checkpoint(format!(
                "lstm{l}.w_ih is {rows}x{cols}, expected {}x{expect_in}",
                4 * cfg.hidden_units
            )));
        }
        let (rows, cols, w_hh) = p.param_block(&format!("lstm{l}.w_hh"))?;
        if rows != 4 * cfg.hidden_units || cols != cfg.hidden_units {
            return Err(PipelineError::Checkpoint(format!(
                "lstm{l}.w_hh is {rows}x{cols}, unexpected shape"
            )));
        }
        let (_, cols, bias) = p.param_block(&format!("lstm{l}.bias"))?;
        if cols != 4 * cfg.hidden_units {
            return Err(PipelineError::Checkpoint(format!(
                "lstm{l}.bias has {cols} values, unexpected shape"
            )));
        }
        net.layers[l].w_ih = w_ih;
        net.layers[l].w_hh = w_hh;
        net.layers[l].bias = bias;
    }
    let (_, _, w1) = p.param_block("head.w1")?;
    let (_, _, b1) = p.param_block("head.b1")?;
    let (_, _, w2) = p.param_block("head.w2")?;
    let (_, _, b2) = p.param_block("head.b2")?;
    if w1.len() != net.head.w1.len()
        || b1.len() != net.head.b1.len()
        || w2.len() != net.head.w2.len()
        || b2.len() != net.head.b2.len()
    {
        return Err(PipelineError::Checkpoint(
            "head block shape mismatch".to_string(),
        ));
    }
    net.head.w1 = w1;
    net.head.b1 = b1;
    net.head.w2 = w2;
    net.head.b2 = b2;

    Ok(SequenceModel {
        role,
        domain,
        vehicle,
        net,
        input_scaler: MinMaxScaler::from_parts(input_min, input_max),
        target_scaler: MinMaxScaler::from_parts(target_min, target_max),
        window,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arbitrary_model() -> SequenceModel {
        let cfg = ModelConfig {
            input_dim: 3,
            hidden_units: 4,
            lstm_layers: 2,
            head_units: 4,
            output_dim: 1,
            window_len: 10,
            seed: 99,
        };
        SequenceModel {
            role: ModelRole::Emissions,
            domain: Domain::Ev,
            vehicle: "i3".to_string(),
            net: SequenceNet::init(&cfg).unwrap(),
            input_scaler: MinMaxScaler::from_parts(vec![0.0, -3.5, 0.1], vec![120.0, 250.0, 100.0]),
            target_scaler: MinMaxScaler::from_parts(vec![0.0], vec![0.1 + 0.2]),
            window: WindowSpec::default(),
            seed: 99,
        }
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let model = arbitrary_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&model, &path, &["config_hash = deadbeef".to_string()]).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn save_is_byte_deterministic() {
        let model = arbitrary_model();
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.ckpt");
        let b = dir.path().join("b.ckpt");
        save_checkpoint(&model, &a, &[]).unwrap();
        save_checkpoint(&model, &b, &[]).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }

    #[test]
    fn corrupt_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, "not a checkpoint\n").unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(PipelineError::Checkpoint(_))
        ));
    }
}
