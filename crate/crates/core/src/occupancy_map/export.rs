use std::io::{self, Write};

use super::{predicted_class, BlockMap, FREE_CLASS};
use crate::geometry::{ClassId, Point3};

pub const CSV_HEADER: &str = "x,y,z,class,prob,alpha_sum";

/// One row per existing voxel, blocks in key order.
pub fn write_csv<W: Write>(map: &BlockMap, mut out: W) -> io::Result<()> {
    let res = map.config().resolution;
    writeln!(out, "{CSV_HEADER}")?;
    for (key, alpha) in map.voxels() {
        let c = key.center(res);
        let class = predicted_class(alpha);
        let sum: f64 = alpha.iter().sum();
        writeln!(
            out,
            "{:.4},{:.4},{:.4},{},{:.6},{:.6}",
            c.x,
            c.y,
            c.z,
            class,
            alpha[class as usize] / sum,
            sum
        )?;
    }
    Ok(())
}

/// Display color for a class id of the 19-class driving-scene scheme.
pub fn class_color(class: u16) -> [u8; 3] {
    let rgb = |r: f64, g: f64, b: f64| {
        [
            (r * 255.0).round() as u8,
            (g * 255.0).round() as u8,
            (b * 255.0).round() as u8,
        ]
    };
    match class {
        1 => rgb(0.960, 0.588, 0.392),  // car
        2 => [245, 230, 100],           // bicycle
        3 => [150, 60, 30],             // motorcycle
        4 => [180, 30, 80],             // truck
        5 => rgb(1.0, 0.314, 0.392),    // other-vehicle
        6 => [30, 30, 255],             // person
        7 => [200, 40, 255],            // bicyclist
        8 => [90, 30, 150],             // motorcyclist
        9 => rgb(1.0, 0.0, 1.0),        // road
        10 => [255, 150, 255],          // parking
        11 => [75, 0, 75],              // sidewalk
        12 => rgb(0.294, 0.0, 0.686),   // other-ground
        13 => rgb(0.0, 0.784, 1.0),     // building
        14 => [50, 120, 255],           // fence
        15 => rgb(0.0, 0.647, 0.0),     // vegetation
        16 => [0, 60, 135],             // trunk
        17 => rgb(0.314, 0.941, 0.588), // terrain
        18 => [150, 240, 255],          // pole
        19 => [0, 0, 255],              // traffic-sign
        _ => [128, 128, 128],
    }
}

/// Binary little-endian PLY of the occupied voxels, colored by class.
pub fn write_ply<W: Write>(map: &BlockMap, out: W) -> io::Result<()> {
    let res = map.config().resolution;
    let occupied: Vec<_> = map
        .voxels()
        .filter_map(|(k, a)| {
            let c = predicted_class(a);
            (c != FREE_CLASS).then(|| (k.center(res), c))
        })
        .collect();
    write_ply_points(&occupied, out)
}

/// Binary little-endian PLY of class-labeled points.
pub fn write_ply_points<W: Write>(points: &[(Point3, ClassId)], mut out: W) -> io::Result<()> {
    write!(
        out,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n\
         property float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\n\
         property ushort class\nend_header\n",
        points.len()
    )?;
    for (p, class) in points {
        for v in [p.x, p.y, p.z] {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
        out.write_all(&class_color(*class))?;
        out.write_all(&class.to_le_bytes())?;
    }
    Ok(())
}
