//! Forward-project an ellipse phantom, reconstruct it by filtered
//! back-projection and report the error inside the central disk.
//!
//! `cargo run --release --example fbp_roundtrip [out_dir]` also writes the
//! phantom, reconstruction and sinogram as PGM images.

use std::path::PathBuf;
use tomolab::fields::{make_phantom, PhantomKind};
use tomolab::io::{write_field_pgm, write_sinogram_pgm};
use tomolab::xray::{fbp_reconstruct, relative_error_on, xray_forward, LineSet};
use tomolab::{GridSpec, RegionMask};

fn main() -> tomolab::Result<()> {
    let grid = GridSpec::square(256)?;
    let phantom = make_phantom(grid, PhantomKind::EllipseSum, 11)?.into_scalar()?;

    for n_angles in [45, 180, 360] {
        let lines = LineSet::for_grid(&grid, n_angles, 1)?;
        let sino = xray_forward(&phantom, &lines)?;
        let rec = fbp_reconstruct(&sino, &grid)?;
        let disk = RegionMask::disk(grid, &[0.0, 0.0], 0.8);
        let err = relative_error_on(&rec, &phantom, &disk)?;
        println!("{n_angles:>4} angles x {} offsets: relative L2 error {err:.4}", lines.n_offsets());

        if let Some(dir) = std::env::args().nth(1).map(PathBuf::from) {
            std::fs::create_dir_all(&dir)?;
            write_field_pgm(&dir.join(format!("reconstruction_{n_angles}.pgm")), &rec)?;
            write_sinogram_pgm(&dir.join(format!("sinogram_{n_angles}.pgm")), &sino)?;
            write_field_pgm(&dir.join("phantom.pgm"), &phantom)?;
        }
    }
    Ok(())
}
