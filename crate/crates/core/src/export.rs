//! Text artifacts: SVG figures, CSV tables and JSON documents.
//!
//! CSV numbers use Rust's shortest round-trip formatting, so every value
//! parses back to the same double. SVG coordinates carry nine significant
//! digits with the y axis flipped for display.

use std::fmt::Write;

use serde_json::{json, Value};

use crate::energy::{EnergyReport, SeriesBound};
use crate::extension::{ExtensionMesh, REFERENCE_TRIANGLE};
use crate::geometry::Point;
use crate::snowflake::{eval_g, HolderEstimate, QuasisymmetryProbe, SnowflakeState};

/// `v` rounded to nine significant digits, printed without an exponent.
pub fn sig9(v: f64) -> String {
    if !v.is_finite() {
        return "0".into();
    }
    let rounded: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
    format!("{}", rounded + 0.0)
}

fn svg_point(p: Point) -> String {
    format!("{},{}", sig9(p.x), sig9(-p.y))
}

fn svg_open(out: &mut String, min: Point, max: Point, margin: f64) {
    let w = max.x - min.x + 2.0 * margin;
    let h = max.y - min.y + 2.0 * margin;
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}" width="800" height="{}">"#,
        sig9(min.x - margin),
        sig9(-max.y - margin),
        sig9(w),
        sig9(h),
        sig9((800.0 * h / w).round()),
    );
}

/// Which side of the extension a figure shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshSide {
    Source,
    Image,
}

/// All affine pieces of the mesh as outlined triangles inside `T`.
pub fn mesh_svg(mesh: &ExtensionMesh, side: MeshSide) -> String {
    let mut out = String::new();
    svg_open(&mut out, Point::new(-1.0, 0.0), Point::new(1.0, 1.0), 0.02);
    let stroke = 0.004 / (1.0 + mesh.depth() as f64 / 4.0);
    let _ = writeln!(
        out,
        r#"<g fill="none" stroke="black" stroke-width="{}" stroke-linejoin="round">"#,
        sig9(stroke)
    );
    let outline: Vec<String> = REFERENCE_TRIANGLE.iter().map(|&p| svg_point(p)).collect();
    let _ = writeln!(out, r#"<polygon points="{}"/>"#, outline.join(" "));
    for cell in mesh.cells() {
        for piece in &cell.pieces {
            let tri = match side {
                MeshSide::Source => piece.source,
                MeshSide::Image => piece.image,
            };
            let pts: Vec<String> = tri.vertices().iter().map(|&p| svg_point(p)).collect();
            let _ = writeln!(out, r#"<polygon points="{}"/>"#, pts.join(" "));
        }
    }
    out.push_str("</g>\n</svg>\n");
    out
}

/// The mesh as JSON: boundary map, depth and every cell with its pieces.
pub fn mesh_json(mesh: &ExtensionMesh) -> Value {
    let cells: Vec<Value> = mesh
        .cells()
        .iter()
        .map(|c| {
            json!({
                "generation": c.interval.gen,
                "index": c.interval.k,
                "source": c.source.pentagon(),
                "image": c.image.pentagon(),
                "pieces": c.pieces.iter().map(|p| json!({
                    "kind": p.kind,
                    "source": p.source.vertices(),
                    "image": p.image.vertices(),
                    "map": p.map.coefficients(),
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({
        "phi": mesh.phi(),
        "depth": mesh.depth(),
        "source_residual_area": mesh.source_residual_area(),
        "image_residual_area": mesh.image_residual_area(),
        "cells": cells,
    })
}

/// One row per generation of the energy report.
pub fn energy_csv(report: &EnergyReport) -> String {
    let mut out = String::from("generation,cells,energy,series_term,partial_total,series_partial\n");
    for (i, g) in report.per_generation.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            g.gen,
            g.cells,
            g.exact_sum,
            g.bound_term,
            report.partial_totals[i],
            report.series_bound_partial.get(i).copied().unwrap_or(f64::NAN),
        );
    }
    out
}

pub fn series_csv(bound: &SeriesBound) -> String {
    let mut out = String::from("generation,term,majorant,partial_sum,majorant_partial_sum\n");
    for (i, t) in bound.terms.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            t.gen, t.term, t.majorant, bound.partial_sums[i], bound.majorant_partial_sums[i]
        );
    }
    out
}

/// The closed polygon `S_n` as a single path.
pub fn snowflake_svg(state: &SnowflakeState) -> String {
    let poly = state.polygon();
    let (mut min, mut max) = (poly[0], poly[0]);
    for p in &poly {
        min = Point::new(min.x.min(p.x), min.y.min(p.y));
        max = Point::new(max.x.max(p.x), max.y.max(p.y));
    }
    let mut out = String::new();
    svg_open(&mut out, min, max, 0.05);
    let mut d = String::new();
    for (i, &p) in poly.iter().enumerate() {
        d.push(if i == 0 { 'M' } else { 'L' });
        d.push_str(&svg_point(p));
    }
    d.push('Z');
    let _ = writeln!(
        out,
        r#"<path d="{d}" fill="none" stroke="black" stroke-width="0.004" stroke-linejoin="round"/>"#
    );
    out.push_str("</svg>\n");
    out
}

/// Every level of the state with its segments, parameter intervals and words.
pub fn snowflake_json(state: &SnowflakeState) -> Value {
    let ex = state.spec.exponents();
    let levels: Vec<Value> = state
        .levels
        .iter()
        .map(|level| {
            Value::Array(
                level
                    .iter()
                    .map(|p| {
                        json!({
                            "word": p.param.word,
                            "segment": [p.segment.start, p.segment.end],
                            "param": [p.param.start, p.param.end],
                            "param_length": p.param.length,
                        })
                    })
                    .collect(),
            )
        })
        .collect();
    json!({
        "spec": state.spec,
        "alpha": ex.alpha,
        "x": ex.x,
        "eta": ex.eta,
        "generation": state.generation(),
        "levels": levels,
    })
}

/// `samples` evenly spaced values `(t, g_n(t))` over `[0, 4)`.
pub fn g_samples_csv(state: &SnowflakeState, samples: usize) -> String {
    let mut out = String::from("t,x,y\n");
    for i in 0..samples {
        let t = 4.0 * i as f64 / samples as f64;
        let p = eval_g(state, t);
        let _ = writeln!(out, "{t},{},{}", p.x, p.y);
    }
    out
}

/// One row per generation: Hölder and quasisymmetry measurements.
pub fn holder_csv(rows: &[(HolderEstimate, QuasisymmetryProbe)]) -> String {
    let mut out = String::from(
        "generation,holder_constant,arc_constant,max_cover_size,qs_min,qs_max,qs_same_side_min,qs_same_side_max\n",
    );
    for (h, q) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            h.generation,
            h.constant,
            h.arc_constant,
            h.max_cover_size,
            q.min_ratio,
            q.max_ratio,
            q.same_side_min,
            q.same_side_max
        );
    }
    out
}
