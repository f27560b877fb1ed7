use nalgebra::Vector3;
use nf_las_core::channel::OfdmGrid;
use nf_las_core::fisher::*;
use nf_las_core::geometry::{build_ula, ArrayGeometry, Position, SPEED_OF_LIGHT};
use num_complex::Complex64;

fn arrays(m: usize, fc: f64, inward: bool) -> Vec<ArrayGeometry> {
    let spacing = SPEED_OF_LIGHT / fc / 2.0;
    [(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)]
        .iter()
        .map(|&(x, y)| {
            let axis = if inward {
                let ux: f64 = 5.0 - x;
                let uy = 5.0 - y;
                let n = (ux * ux + uy * uy).sqrt();
                Vector3::new(-uy / n, ux / n, 0.0)
            } else {
                Vector3::x()
            };
            build_ula(m, spacing, Position::new(x, y, 3.0), axis).unwrap()
        })
        .collect()
}

fn scenario(m: usize, mode: ProcessingMode, inward: bool) -> DmimoScenario {
    DmimoScenario::new(arrays(m, 3.5e9, inward), 3.5e9, Position::new(2.0, 9.0, 1.0), mode, vec![Complex64::new(1.0, 0.0); 4]).unwrap()
}

fn main() {
    for inward in [false, true] {
        println!("== arrays {} ==", if inward { "inward-facing" } else { "along x" });
        let sc4 = scenario(4, ProcessingMode::Noncoherent, inward);
        let grid01 = OfdmGrid::new(3.5e9, 0.1e6, 64).unwrap();
        let snr = calibrate_snr_ref(&sc4, &grid01, 0.278).unwrap();
        let bws: Vec<f64> = (0..15).map(|i| 0.1e6 * (10f64).powf(i as f64 * 4.0 / 14.0)).collect();
        let s4 = peb_bandwidth_sweep(&sc4, &bws, 64, snr).unwrap();
        let s8 = peb_bandwidth_sweep(&scenario(8, ProcessingMode::Noncoherent, inward), &bws, 64, snr).unwrap();
        let s16 = peb_bandwidth_sweep(&scenario(16, ProcessingMode::Noncoherent, inward), &bws, 64, snr).unwrap();
        let sc = peb_bandwidth_sweep(&scenario(4, ProcessingMode::Coherent, inward), &bws, 64, snr).unwrap();
        let sc8 = peb_bandwidth_sweep(&scenario(8, ProcessingMode::Coherent, inward), &bws, 64, snr).unwrap();
        println!("  snr_ref = {snr:.4e}");
        println!("  {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}", "BW_MHz", "nc_M4", "nc_M8", "nc_M16", "coh_M4", "coh_M8");
        for i in [0, 7, 14] {
            println!(
                "  {:>10.3} {:>10.5} {:>10.5} {:>10.5} {:>10.6} {:>10.6}",
                bws[i] / 1e6, s4[i].1.peb, s8[i].1.peb, s16[i].1.peb, sc[i].1.peb, sc8[i].1.peb
            );
        }
        println!("  ratio bw (nc M4): {:.2}  paper 12.2", s4[0].1.peb / s4[14].1.peb);
        println!("  ratio M 4/8: {:.3}  paper 2.049", s4[0].1.peb / s8[0].1.peb);
        println!("  ratio M 8/16: {:.3}  paper 2.012", s8[0].1.peb / s16[0].1.peb);
        println!("  coherent var: {:.3}  paper 0.13", (sc[0].1.peb - sc[14].1.peb).abs() / sc[0].1.peb);
        println!("  coherent gain @0.1MHz: {:.1}  paper 147", s4[0].1.peb / sc[0].1.peb);
        println!("  coherent M-invariance 4 vs 8: {:.4}", sc[0].1.peb / sc8[0].1.peb);
    }
}
