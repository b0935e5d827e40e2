//! Reference implementations shared by the oracle tests. Procrustes uses
//! Horn's quaternion solution, which shares no code path with the
//! SVD-based alignment in the library.

#![allow(dead_code)]

use motion_prior::metrics::JointTrajectory;
use nalgebra::{Matrix3, Matrix4, SymmetricEigen, UnitQuaternion, Vector3};

pub fn naive_mpjpe(p: &[Vec<[f64; 3]>], g: &[Vec<[f64; 3]>]) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for t in 0..p.len() {
        for j in 0..p[t].len() {
            let d: f64 = (0..3).map(|a| (p[t][j][a] - g[t][j][a]).powi(2)).sum();
            total += d.sqrt();
            n += 1;
        }
    }
    total / n as f64
}

fn second_diff(x: &[Vec<[f64; 3]>], t: usize, j: usize) -> [f64; 3] {
    std::array::from_fn(|a| x[t + 1][j][a] - 2.0 * x[t][j][a] + x[t - 1][j][a])
}

pub fn naive_acc(x: &[Vec<[f64; 3]>]) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for t in 1..x.len() - 1 {
        for j in 0..x[t].len() {
            total += second_diff(x, t, j).iter().map(|v| v * v).sum::<f64>().sqrt();
            n += 1;
        }
    }
    total / n as f64
}

pub fn naive_acc_err(p: &[Vec<[f64; 3]>], g: &[Vec<[f64; 3]>]) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for t in 1..p.len() - 1 {
        for j in 0..p[t].len() {
            let (a, b) = (second_diff(p, t, j), second_diff(g, t, j));
            total += (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt();
            n += 1;
        }
    }
    total / n as f64
}

/// Horn (1987): the optimal rotation is the top eigenvector of a 4×4
/// symmetric matrix built from the cross-covariance.
pub fn horn_align(src: &[[f64; 3]], dst: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let n = src.len() as f64;
    let mean = |pts: &[[f64; 3]]| -> [f64; 3] { std::array::from_fn(|a| pts.iter().map(|p| p[a]).sum::<f64>() / n) };
    let (ms, md) = (mean(src), mean(dst));
    let sc: Vec<[f64; 3]> = src.iter().map(|p| std::array::from_fn(|a| p[a] - ms[a])).collect();
    let dc: Vec<[f64; 3]> = dst.iter().map(|p| std::array::from_fn(|a| p[a] - md[a])).collect();
    let mut s = [[0.0; 3]; 3];
    for (a, b) in sc.iter().zip(&dc) {
        for i in 0..3 {
            for k in 0..3 {
                s[i][k] += a[i] * b[k];
            }
        }
    }
    let [[sxx, sxy, sxz], [syx, syy, syz], [szx, szy, szz]] = s;
    let nm = Matrix4::new(
        sxx + syy + szz, syz - szy, szx - sxz, sxy - syx,
        syz - szy, sxx - syy - szz, sxy + syx, szx + sxz,
        szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy,
        sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz,
    );
    let eig = SymmetricEigen::new(nm);
    let top = eig.eigenvalues.imax();
    let q = eig.eigenvectors.column(top);
    let rot: Matrix3<f64> = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]))
        .to_rotation_matrix()
        .into_inner();
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in sc.iter().zip(&dc) {
        let ra = rot * Vector3::from(*a);
        num += ra.dot(&Vector3::from(*b));
        den += a.iter().map(|v| v * v).sum::<f64>();
    }
    let scale = num / den;
    sc.iter()
        .map(|a| {
            let y = rot * Vector3::from(*a) * scale;
            std::array::from_fn(|k| y[k] + md[k])
        })
        .collect()
}

pub fn to_traj(x: &[Vec<[f64; 3]>]) -> JointTrajectory {
    JointTrajectory::new(x.iter().map(|f| f.iter().map(|p| Vector3::from(*p)).collect()).collect(), 25.0).unwrap()
}
