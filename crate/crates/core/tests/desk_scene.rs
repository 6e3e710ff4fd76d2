mod common;

use std::sync::OnceLock;

use common::*;
use hhsar::bpa::{bpa_reconstruct, ImageVolume};
use hhsar::metrics::{max_intensity_projection, Projection, PsfCut, DEFAULT_FLOOR_DB};
use hhsar::model::Point3;
use hhsar::simulator::scene_from_spec;

fn bpa_volume() -> &'static ImageVolume {
    static V: OnceLock<ImageVolume> = OnceLock::new();
    V.get_or_init(|| bpa_reconstruct(&desk_cube(), &desk_region(), DESK_DIMS).unwrap())
}

fn scatterers() -> Vec<Point3> {
    scene_from_spec(&desk_scene_spec(), &desk_region())
        .unwrap()
        .scatterers()
        .iter()
        .map(|s| s.position)
        .collect()
}

/// Voxels that beat all 26 neighbours and exceed `fraction` of the peak.
fn local_maxima(v: &ImageVolume, fraction: f64) -> Vec<Point3> {
    let g = v.cartesian().unwrap();
    let mag = v.magnitudes();
    let top = mag.iter().copied().fold(0.0, f64::max);
    let [nx, ny, nz] = g.dims;
    let mut out = Vec::new();
    for iz in 0..nz {
        for iy in 0..ny {
            for ix in 0..nx {
                let m = mag[g.index(ix, iy, iz)];
                if m < fraction * top {
                    continue;
                }
                let mut is_max = true;
                for dz in -1i64..=1 {
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            let (x, y, z) = (ix as i64 + dx, iy as i64 + dy, iz as i64 + dz);
                            if (dx, dy, dz) == (0, 0, 0)
                                || x < 0
                                || y < 0
                                || z < 0
                                || x >= nx as i64
                                || y >= ny as i64
                                || z >= nz as i64
                            {
                                continue;
                            }
                            if mag[g.index(x as usize, y as usize, z as usize)] > m {
                                is_max = false;
                            }
                        }
                    }
                }
                if is_max {
                    out.push(g.point(ix, iy, iz));
                }
            }
        }
    }
    out
}

#[test]
fn twenty_seven_maxima_at_scatterer_sites() {
    let v = bpa_volume();
    let step = v.cartesian().unwrap().step;
    // Depth peaks may be pulled by neighbours within a quarter of c / 2B.
    let depth_tol = 0.25 * 3e8 / (2.0 * 3e9);
    let peaks = local_maxima(v, 0.6);
    assert_eq!(peaks.len(), 27, "{peaks:?}");
    let sites = scatterers();
    let mut matched = vec![false; sites.len()];
    for p in &peaks {
        let near = sites.iter().position(|s| {
            (p.x - s.x).abs() <= 1.5 * step[0]
                && (p.y - s.y).abs() <= 1.5 * step[1]
                && (p.z - s.z).abs() <= depth_tol
        });
        let i = near.unwrap_or_else(|| panic!("peak {p:?} matches no scatterer"));
        assert!(!matched[i], "two peaks at {:?}", sites[i]);
        matched[i] = true;
    }
}

fn bright_spots(p: &Projection, level: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for row in 0..p.height {
        for col in 0..p.width {
            let v = p.get(col, row);
            if v < level {
                continue;
            }
            let neighbours = (-1i64..=1).flat_map(|dr| (-1i64..=1).map(move |dc| (dr, dc)));
            let is_max = neighbours.filter(|&d| d != (0, 0)).all(|(dr, dc)| {
                let (r, c) = (row as i64 + dr, col as i64 + dc);
                r < 0
                    || c < 0
                    || r >= p.height as i64
                    || c >= p.width as i64
                    || p.get(c as usize, r as usize) <= v
            });
            if is_max {
                out.push((col, row));
            }
        }
    }
    out
}

#[test]
fn z_projection_shows_three_by_three_lattice() {
    let v = bpa_volume();
    let g = v.cartesian().unwrap();
    let image = max_intensity_projection(v, 2, DEFAULT_FLOOR_DB).unwrap();
    let spots = bright_spots(&image, 0.8);
    assert_eq!(spots.len(), 9, "{spots:?}");
    let spacing = 0.175 / 3.0;
    for (col, row) in spots {
        let x = g.origin.x + col as f64 * g.step[0];
        let y = g.origin.y + (g.dims[1] - 1 - row) as f64 * g.step[1];
        for c in [x, y] {
            let cell = (c / spacing).round();
            assert!(cell.abs() <= 1.0);
            assert!((c - cell * spacing).abs() <= 1.5 * g.step[0], "{x}, {y}");
        }
    }
}

#[test]
fn centre_psf_is_well_formed() {
    let v = bpa_volume();
    let centre = Point3::new(0.0, 0.0, 0.4 / 3.0);
    let cut = PsfCut::extract(v, 0, &centre)
        .unwrap()
        .window(0.0, 0.5 * 0.175 / 3.0);
    let r = cut.metrics().unwrap();
    assert!(r.pslr_db < -6.0 && r.islr_db < 0.0, "{r:?}");
    assert!(r.peak_position.abs() <= v.cartesian().unwrap().step[0]);
    // Cross-range resolution of the full aperture: λ_c·R / (2L).
    let lambda = 3e8 / 13.5e9;
    let predicted = lambda * centre.z / (2.0 * APERTURE) * 1e3;
    assert!(
        (r.mainlobe_width_mm / predicted - 1.0).abs() < 0.5,
        "{} vs {predicted}",
        r.mainlobe_width_mm
    );
}
