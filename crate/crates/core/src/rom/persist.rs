//! `ROMPCA1` section-tagged model file and score CSV export.

use std::path::Path;

use nalgebra::{DMatrix, DVector, RowDVector};

use super::{PcaModel, ScalingParams};
use crate::binfmt::{self, Payload, Reader, Section};
use crate::error::{Error, Result};
use crate::snapshots::ComponentLayout;

const MAGIC: &[u8] = b"ROMPCA1";

pub fn save_rom(path: &Path, model: &PcaModel, scaling: Option<&ScalingParams>) -> Result<()> {
    let mut sections = Vec::new();
    let mut meta = Payload::new();
    meta.f64(model.dt).u32(model.layout.tag());
    sections.push(Section::new(b"META", meta));
    let mut mean = Payload::new();
    mean.f64s(model.mean.as_slice());
    sections.push(Section::new(b"MEAN", mean));
    let mut eofs = Payload::new();
    eofs.matrix(&model.eofs);
    sections.push(Section::new(b"EOFS", eofs));
    let mut sval = Payload::new();
    sval.f64s(model.singular_values.as_slice());
    sections.push(Section::new(b"SVAL", sval));
    let mut scores = Payload::new();
    scores.matrix(&model.scores);
    sections.push(Section::new(b"SCOR", scores));
    if let Some(s) = scaling {
        let mut p = Payload::new();
        p.f64s(s.min.as_slice()).f64s(s.max.as_slice());
        let flags: Vec<f64> = s.constant.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect();
        p.f64s(&flags);
        sections.push(Section::new(b"SCAL", p));
    }
    binfmt::write_sections(path, MAGIC, &sections)
}

pub fn load_rom(path: &Path) -> Result<(PcaModel, Option<ScalingParams>)> {
    let sections = binfmt::read_sections(path, MAGIC)?;
    let section = |tag: &[u8; 4]| binfmt::find(&sections, tag, path);

    let meta = section(b"META")?;
    let mut rd = Reader::new(&meta.payload, path, "META");
    let dt = rd.f64()?;
    let tag = rd.u32()?;
    let layout =
        ComponentLayout::from_tag(tag).ok_or_else(|| Error::format(path, format!("unknown layout tag {tag}")))?;

    let mean = RowDVector::from_vec(Reader::new(&section(b"MEAN")?.payload, path, "MEAN").f64s()?);
    let eofs = Reader::new(&section(b"EOFS")?.payload, path, "EOFS").matrix()?;
    let singular_values = DVector::from_vec(Reader::new(&section(b"SVAL")?.payload, path, "SVAL").f64s()?);
    let scores = Reader::new(&section(b"SCOR")?.payload, path, "SCOR").matrix()?;

    let r = eofs.nrows();
    if mean.len() != eofs.ncols() || singular_values.len() != r || scores.ncols() != r {
        return Err(Error::format(
            path,
            format!(
                "dimension mismatch: mean {}, eofs {}x{}, singular values {}, scores {}x{}",
                mean.len(),
                r,
                eofs.ncols(),
                singular_values.len(),
                scores.nrows(),
                scores.ncols()
            ),
        ));
    }

    let scaling = match sections.iter().find(|s| &s.tag == b"SCAL") {
        None => None,
        Some(s) => {
            let mut rd = Reader::new(&s.payload, path, "SCAL");
            let min = rd.f64s()?;
            let max = rd.f64s()?;
            let flags = rd.f64s()?;
            if min.len() != max.len() || flags.len() != min.len() {
                return Err(Error::format(path, "SCAL: inconsistent column counts"));
            }
            Some(ScalingParams {
                min: DVector::from_vec(min),
                max: DVector::from_vec(max),
                constant: flags.iter().map(|&f| f != 0.0).collect(),
            })
        }
    };

    Ok((
        PcaModel {
            mean,
            eofs,
            scores,
            singular_values,
            dt,
            layout,
        },
        scaling,
    ))
}

/// Header `t,pc0,...`, one row per step.
pub fn save_scores_csv(path: &Path, scores: &DMatrix<f64>, dt: f64) -> Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend((0..scores.ncols()).map(|c| format!("pc{c}")));
    let rows = (0..scores.nrows()).map(|r| {
        std::iter::once(r as f64 * dt)
            .chain(scores.row(r).iter().copied())
            .collect::<Vec<_>>()
    });
    crate::table::write_csv(path, &header, rows)
}
