//! LOS/NLOS grid maps: ray-traced ground truth against forest estimates,
//! written as binary PGM.

use std::io::Write;
use std::path::Path;

use crate::channel::{augment, to_sparse_cir, AugmentSpec};
use crate::error::{Error, Result};
use crate::features::extract_features;
use crate::forest::ForestModel;
use crate::geometry::Vec3;
use crate::parallel::{map_indexed, Parallelism};
use crate::scene::{GridPlan, ReceiverPlan, Scene};
use crate::tracer::{trace_all, LinkResult, LosState};
use crate::Label;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cell {
    Los,
    Nlos,
    /// No path, or nothing could be estimated.
    Dead,
}

impl Cell {
    pub fn gray(self) -> u8 {
        match self {
            Cell::Los => 255,
            Cell::Nlos => 64,
            Cell::Dead => 0,
        }
    }
}

impl From<Label> for Cell {
    fn from(l: Label) -> Self {
        match l {
            Label::Los => Cell::Los,
            Label::Nlos => Cell::Nlos,
        }
    }
}

impl From<LosState> for Cell {
    fn from(s: LosState) -> Self {
        match s {
            LosState::Los => Cell::Los,
            LosState::Nlos => Cell::Nlos,
            LosState::Dead => Cell::Dead,
        }
    }
}

/// Cells in grid order: x fastest, row `iy = 0` first.
#[derive(Clone, Debug, PartialEq)]
pub struct GridMap {
    pub width: usize,
    pub height: usize,
    pub origin: Vec3,
    pub spacing: f64,
    pub cells: Vec<Cell>,
}

impl GridMap {
    pub fn new(plan: &GridPlan, cells: Vec<Cell>) -> Result<Self> {
        let (width, height) = plan.dims();
        if width * height != cells.len() {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} grid but {} cells",
                cells.len()
            )));
        }
        Ok(GridMap {
            width,
            height,
            origin: plan.origin,
            spacing: plan.spacing,
            cells,
        })
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.cells.iter().map(|c| c.gray()));
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_pgm()).map_err(|e| Error::io(path, e))
    }
}

/// Share of cells that are not DEAD in `truth` on which both maps agree.
pub fn agreement(truth: &GridMap, estimate: &GridMap) -> Result<f64> {
    if (truth.width, truth.height) != (estimate.width, estimate.height) {
        return Err(Error::DimensionMismatch(format!(
            "truth is {}x{}, estimate is {}x{}",
            truth.width, truth.height, estimate.width, estimate.height
        )));
    }
    let (mut live, mut agree) = (0usize, 0usize);
    for (t, e) in truth.cells.iter().zip(&estimate.cells) {
        if *t != Cell::Dead {
            live += 1;
            agree += usize::from(t == e);
        }
    }
    if live == 0 {
        return Err(Error::Empty("every truth cell is dead"));
    }
    Ok(agree as f64 / live as f64)
}

/// Writes both maps and returns their agreement.
pub fn render_map(truth: &GridMap, estimate: &GridMap, truth_path: &Path, estimate_path: &Path) -> Result<f64> {
    let ratio = agreement(truth, estimate)?;
    truth.write_pgm(truth_path)?;
    estimate.write_pgm(estimate_path)?;
    Ok(ratio)
}

fn grid_plan(scene: &Scene) -> Result<&GridPlan> {
    match &scene.desc().receivers {
        ReceiverPlan::Grid(g) => Ok(g),
        ReceiverPlan::Trajectory(_) => Err(Error::InvalidArgument("maps need a grid receiver plan".into())),
    }
}

pub fn truth_map(scene: &Scene, links: &[LinkResult]) -> Result<GridMap> {
    GridMap::new(grid_plan(scene)?, links.iter().map(|l| l.los_state.into()).collect())
}

/// Classifies every augmented sample of a cell and takes the majority,
/// NLOS on ties. DEAD links stay DEAD.
pub fn estimate_map(scene: &Scene, links: &[LinkResult], model: &ForestModel, spec: &AugmentSpec, par: Parallelism) -> Result<GridMap> {
    let plan = grid_plan(scene)?;
    spec.validate()?;
    let radio = scene.radio();
    let cells = map_indexed(par, links.len(), |i| -> Result<Cell> {
        let link = &links[i];
        let Some(label) = link.los_state.label() else {
            return Ok(Cell::Dead);
        };
        let cir = to_sparse_cir(link)?;
        let (mut votes, mut nlos) = (0usize, 0usize);
        for sampled in augment(&cir, spec, radio, i as u32)? {
            // The label argument is not used by prediction.
            let Ok(f) = extract_features(&sampled, radio.tx_power_dbm, label, link.rx_position, i as u32) else {
                continue;
            };
            votes += 1;
            nlos += usize::from(model.predict(&f.values()) == Label::Nlos);
        }
        Ok(match votes {
            0 => Cell::Dead,
            _ if 2 * nlos >= votes => Cell::Nlos,
            _ => Cell::Los,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    GridMap::new(plan, cells)
}

/// Traces the grid once and builds both maps.
pub fn build_maps(scene: &Scene, model: &ForestModel, spec: &AugmentSpec, par: Parallelism) -> Result<(GridMap, GridMap)> {
    let links = trace_all(scene, par)?;
    Ok((truth_map(scene, &links)?, estimate_map(scene, &links, model, spec, par)?))
}
