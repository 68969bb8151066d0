//! Parameter checkpoints as CSV: a header block, then one named tensor per
//! line as `name,rows,cols,v0,v1,...`. Values use the shortest decimal that
//! round-trips, so a save/load cycle is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use hitnet_core::decoders::{Decoder, DecoderKind, Hyper};
use hitnet_core::hit_spec::HitSpec;
use hitnet_core::rng::Rng;

const MAGIC: &str = "# hitnet checkpoint v1";

fn hyper_line(h: &Hyper) -> String {
    format!(
        "hyper,pts_per_seg={},out_pts={},gen_hidden={},gen_layers={},homotopy_hidden={},width={},heads={},layers={},ff={},max_positions={},cover_hidden={},gru_hidden={}",
        h.pts_per_seg, h.out_pts, h.gen_hidden, h.gen_layers, h.homotopy_hidden, h.width, h.heads, h.layers, h.ff, h.max_positions, h.cover_hidden, h.gru_hidden
    )
}

fn parse_hyper(line: &str) -> anyhow::Result<Hyper> {
    let mut h = Hyper::default();
    for kv in line.split(',').skip(1) {
        let (k, v) = kv.split_once('=').ok_or_else(|| anyhow!("bad hyper entry `{kv}`"))?;
        let v: usize = v.parse().with_context(|| format!("hyper `{k}`"))?;
        match k {
            "pts_per_seg" => h.pts_per_seg = v,
            "out_pts" => h.out_pts = v,
            "gen_hidden" => h.gen_hidden = v,
            "gen_layers" => h.gen_layers = v,
            "homotopy_hidden" => h.homotopy_hidden = v,
            "width" => h.width = v,
            "heads" => h.heads = v,
            "layers" => h.layers = v,
            "ff" => h.ff = v,
            "max_positions" => h.max_positions = v,
            "cover_hidden" => h.cover_hidden = v,
            "gru_hidden" => h.gru_hidden = v,
            _ => bail!("unknown hyper key `{k}`"),
        }
    }
    Ok(h)
}

pub fn to_string(dec: &Decoder) -> String {
    let mut s = format!("{MAGIC}\nkind,{}\nspace,{}\n{}\n", dec.kind.name(), dec.spec.name, hyper_line(&dec.hp));
    for (i, t) in dec.store.tensors().iter().enumerate() {
        let _ = write!(s, "{},{},{}", dec.store.name(hitnet_core::autograd::ParamId(i)), t.rows, t.cols);
        for v in &t.data {
            let _ = write!(s, ",{v:?}");
        }
        s.push('\n');
    }
    s
}

pub fn save(dec: &Decoder, path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, to_string(dec))?;
    Ok(())
}

/// Rebuild the decoder for `spec` and overwrite every parameter by name.
pub fn from_str(text: &str, spec: &HitSpec) -> anyhow::Result<Decoder> {
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        bail!("not a hitnet checkpoint");
    }
    let kind_line = lines.next().ok_or_else(|| anyhow!("missing kind"))?;
    let kind = kind_line
        .strip_prefix("kind,")
        .and_then(DecoderKind::parse)
        .ok_or_else(|| anyhow!("bad kind line `{kind_line}`"))?;
    let space = lines.next().and_then(|l| l.strip_prefix("space,")).ok_or_else(|| anyhow!("missing space"))?;
    if space != spec.name {
        bail!("checkpoint is for space `{space}`, spec is `{}`", spec.name);
    }
    let hp = parse_hyper(lines.next().ok_or_else(|| anyhow!("missing hyper"))?)?;
    let mut dec = Decoder::compile(spec, kind, &hp, &mut Rng::new(0))?;
    let mut seen = vec![false; dec.store.len()];
    for line in lines.filter(|l| !l.is_empty()) {
        let mut f = line.split(',');
        let name = f.next().unwrap();
        let id = dec.store.find(name).ok_or_else(|| anyhow!("unknown tensor `{name}`"))?;
        let rows: usize = f.next().ok_or_else(|| anyhow!("missing rows"))?.parse()?;
        let cols: usize = f.next().ok_or_else(|| anyhow!("missing cols"))?.parse()?;
        let t = dec.store.get_mut(id);
        if (rows, cols) != (t.rows, t.cols) {
            bail!("tensor `{name}` is {rows}x{cols}, expected {}x{}", t.rows, t.cols);
        }
        let vals: Vec<f64> = f.map(str::parse).collect::<Result<_, _>>().with_context(|| format!("tensor `{name}`"))?;
        if vals.len() != rows * cols {
            bail!("tensor `{name}` has {} values, expected {}", vals.len(), rows * cols);
        }
        t.data = vals;
        seen[id.0] = true;
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        bail!("checkpoint lacks tensor `{}`", dec.store.name(hitnet_core::autograd::ParamId(i)));
    }
    Ok(dec)
}

pub fn load(path: &Path, spec: &HitSpec) -> anyhow::Result<Decoder> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    from_str(&text, spec)
}
