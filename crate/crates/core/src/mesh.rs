//! Structured two-subdomain meshes.
//!
//! The domain is a pair of unit-height boxes `(x_left, 0) × (0,1)` and
//! `(0, x_right) × (0,1)` joined along a shared interface. The interface is
//! either the straight segment `x = 0` or a sine arc `γ(t) = (r sin(k̂ π t), t)`;
//! in the curved case every horizontal grid line is stretched linearly between
//! the outer wall and the curve (transfinite interpolation), so the two
//! subdomain meshes stay conforming along the interface by construction.
//!
//! Each quad cell is split along its bottom-left/top-right diagonal. On a
//! uniform straight-interface mesh this triangulation reproduces the classic
//! five-point stencil, which keeps the interface operators exactly
//! sine-diagonalizable — the workhorse configuration for validating the
//! probing machinery.

use std::io::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub enum InterfaceGeometry {
    Straight {
        /// Number of interior interface nodes N_h.
        samples: usize,
    },
    SineCurve {
        amplitude: f64,
        frequency: usize,
        samples: usize,
    },
}

impl InterfaceGeometry {
    pub fn samples(&self) -> usize {
        match self {
            InterfaceGeometry::Straight { samples } => *samples,
            InterfaceGeometry::SineCurve { samples, .. } => *samples,
        }
    }

    /// Horizontal position of the interface at parameter t ∈ [0, 1].
    pub fn curve_x(&self, t: f64) -> f64 {
        match self {
            InterfaceGeometry::Straight { .. } => 0.0,
            InterfaceGeometry::SineCurve {
                amplitude,
                frequency,
                ..
            } => amplitude * (*frequency as f64 * std::f64::consts::PI * t).sin(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interior1,
    Interior2,
    Interface,
    DirichletBoundary,
    /// Reserved for future boundary types; the strip geometry is Dirichlet
    /// on its whole outer boundary.
    NeumannBoundary,
}

impl NodeClass {
    pub fn tag(&self) -> &'static str {
        match self {
            NodeClass::Interior1 => "interior1",
            NodeClass::Interior2 => "interior2",
            NodeClass::Interface => "interface",
            NodeClass::DirichletBoundary => "dirichlet",
            NodeClass::NeumannBoundary => "neumann",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StructuredMesh {
    pub nodes: Vec<[f64; 2]>,
    /// Triangles, counterclockwise vertex order.
    pub cells: Vec<[usize; 3]>,
    /// Subdomain of each cell (1 or 2).
    pub cell_side: Vec<u8>,
    pub node_class: Vec<NodeClass>,
    /// Interior interface nodes ordered bottom to top (length N_h).
    pub interface_order: Vec<usize>,
    /// Full interface column including the two boundary endpoints.
    pub interface_column: Vec<usize>,
    nx: usize,
    ny: usize,
}

/// Builds the conforming two-subdomain mesh: `nx_per_side` horizontal
/// intervals in each subdomain and `ny` vertical intervals, where `ny` must
/// equal `geometry.samples() + 1` so the interior interface nodes line up
/// with the requested interface resolution.
pub fn build_strip_mesh(
    x_left: f64,
    x_right: f64,
    geometry: &InterfaceGeometry,
    nx_per_side: usize,
    ny: usize,
) -> Result<StructuredMesh> {
    if !(x_left < 0.0 && 0.0 < x_right) {
        return Err(Error::InvalidMesh(format!(
            "subdomain boxes must straddle x = 0, got [{}, {}]",
            x_left, x_right
        )));
    }
    if nx_per_side < 2 {
        return Err(Error::InvalidMesh(format!(
            "need at least 2 horizontal intervals per side, got {}",
            nx_per_side
        )));
    }
    if ny < 2 {
        return Err(Error::InvalidMesh(format!(
            "need at least 2 vertical intervals, got {}",
            ny
        )));
    }
    if ny != geometry.samples() + 1 {
        return Err(Error::InvalidMesh(format!(
            "ny = {} inconsistent with {} interface samples (expected ny = samples + 1)",
            ny,
            geometry.samples()
        )));
    }
    if let InterfaceGeometry::SineCurve { amplitude, .. } = geometry {
        if amplitude.abs() >= (-x_left).min(x_right) {
            return Err(Error::AmplitudeTooLarge {
                amplitude: *amplitude,
                x_left,
                x_right,
            });
        }
    }

    let nx = nx_per_side;
    let ncols = 2 * nx + 1;
    let nrows = ny + 1;
    let node = |i: usize, j: usize| j * ncols + i;

    let mut nodes = Vec::with_capacity(ncols * nrows);
    for j in 0..nrows {
        let y = j as f64 / ny as f64;
        let gx = geometry.curve_x(y);
        // the mapped interface must stay strictly inside both boxes
        if gx <= x_left || gx >= x_right {
            return Err(Error::AmplitudeTooLarge {
                amplitude: gx,
                x_left,
                x_right,
            });
        }
        for i in 0..ncols {
            let x = if i <= nx {
                x_left + (i as f64 / nx as f64) * (gx - x_left)
            } else {
                gx + ((i - nx) as f64 / nx as f64) * (x_right - gx)
            };
            nodes.push([x, y]);
        }
    }

    let mut node_class = Vec::with_capacity(nodes.len());
    for j in 0..nrows {
        for i in 0..ncols {
            let class = if j == 0 || j == ny || i == 0 || i == ncols - 1 {
                NodeClass::DirichletBoundary
            } else if i == nx {
                NodeClass::Interface
            } else if i < nx {
                NodeClass::Interior1
            } else {
                NodeClass::Interior2
            };
            node_class.push(class);
        }
    }

    let mut cells = Vec::with_capacity(2 * (ncols - 1) * ny);
    let mut cell_side = Vec::with_capacity(cells.capacity());
    for j in 0..ny {
        for i in 0..ncols - 1 {
            let side = if i < nx { 1u8 } else { 2u8 };
            // diagonal from (i, j) to (i+1, j+1)
            cells.push([node(i, j), node(i + 1, j), node(i + 1, j + 1)]);
            cell_side.push(side);
            cells.push([node(i, j), node(i + 1, j + 1), node(i, j + 1)]);
            cell_side.push(side);
        }
    }
    for (idx, cell) in cells.iter().enumerate() {
        let area = signed_area(&nodes, cell);
        if area <= 1e-14 {
            return Err(Error::DegenerateCell { cell: idx, area });
        }
    }

    let interface_order: Vec<usize> = (1..ny).map(|j| node(nx, j)).collect();
    let interface_column: Vec<usize> = (0..nrows).map(|j| node(nx, j)).collect();

    Ok(StructuredMesh {
        nodes,
        cells,
        cell_side,
        node_class,
        interface_order,
        interface_column,
        nx,
        ny,
    })
}

pub fn signed_area(nodes: &[[f64; 2]], cell: &[usize; 3]) -> f64 {
    let [a, b, c] = [nodes[cell[0]], nodes[cell[1]], nodes[cell[2]]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl StructuredMesh {
    pub fn nx_per_side(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Number of interior interface nodes.
    pub fn n_interface(&self) -> usize {
        self.interface_order.len()
    }

    /// Polyline length of the full interface, endpoints included.
    pub fn interface_arclength(&self) -> f64 {
        self.interface_column
            .windows(2)
            .map(|w| {
                let a = self.nodes[w[0]];
                let b = self.nodes[w[1]];
                ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
            })
            .sum()
    }

    /// Curve parameter t of each interior interface node (its y coordinate).
    pub fn interface_params(&self) -> Vec<f64> {
        self.interface_order
            .iter()
            .map(|&n| self.nodes[n][1])
            .collect()
    }

    /// Lumped interface length weights: half the adjacent polyline segment
    /// lengths around each interior interface node.
    pub fn interface_weights(&self) -> Vec<f64> {
        let seg: Vec<f64> = self
            .interface_column
            .windows(2)
            .map(|w| {
                let a = self.nodes[w[0]];
                let b = self.nodes[w[1]];
                ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
            })
            .collect();
        (0..self.interface_order.len())
            .map(|p| 0.5 * (seg[p] + seg[p + 1]))
            .collect()
    }

    /// Plain-text listing for debugging: nodes as `index x y tag`, then cells
    /// as `index v0 v1 v2 side`.
    pub fn write_listing(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "# nodes: index x y tag")?;
        for (i, (p, c)) in self.nodes.iter().zip(&self.node_class).enumerate() {
            writeln!(w, "{} {:.16e} {:.16e} {}", i, p[0], p[1], c.tag())?;
        }
        writeln!(w, "# cells: index v0 v1 v2 side")?;
        for (i, (cell, s)) in self.cells.iter().zip(&self.cell_side).enumerate() {
            writeln!(w, "{} {} {} {} {}", i, cell[0], cell[1], cell[2], s)?;
        }
        Ok(())
    }
}
