//! Eigenface (PCA) and fisherface (PCA then LDA) projections with
//! nearest-exemplar matching.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{Backend, RecognitionError};
use crate::vision::GrayImage;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubspaceConfig {
    /// Eigenface components to keep; `None` keeps every non-degenerate one.
    pub num_components: Option<usize>,
}

// relative to the largest gram eigenvalue
const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubspaceModel {
    kind: Backend,
    width: u32,
    height: u32,
    classes: Vec<String>,
    mean: Vec<f64>,
    /// Projection rows, each of image dimension.
    basis: Vec<Vec<f64>>,
    /// Variance captured by each eigenface row (empty for fisherface).
    eigenvalues: Vec<f64>,
    exemplars: Vec<(usize, Vec<f64>)>,
}

impl SubspaceModel {
    pub fn kind(&self) -> Backend {
        self.kind
    }

    pub fn input_size(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn components(&self) -> usize {
        self.basis.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn exemplars(&self) -> &[(usize, Vec<f64>)] {
        &self.exemplars
    }

    pub fn project(&self, face: &GrayImage) -> Result<Vec<f64>, RecognitionError> {
        let x = self.flatten(face)?;
        Ok(self.project_vec(&x))
    }

    fn flatten(&self, face: &GrayImage) -> Result<Vec<f64>, RecognitionError> {
        if face.width() != self.width || face.height() != self.height {
            return Err(RecognitionError::DimensionMismatch {
                expected: self.mean.len(),
                got: face.pixels().len(),
            });
        }
        Ok(face.pixels().iter().map(|&p| p as f64).collect())
    }

    fn project_vec(&self, x: &[f64]) -> Vec<f64> {
        self.basis
            .iter()
            .map(|row| {
                row.iter()
                    .zip(x.iter().zip(&self.mean))
                    .map(|(b, (v, m))| b * (v - m))
                    .sum()
            })
            .collect()
    }

    /// Mean plus the weighted basis rows; exact inverse of `project` for
    /// faces in the span of an orthonormal (eigenface) basis.
    pub fn reconstruct(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, row) in coeffs.iter().zip(&self.basis) {
            for (o, b) in out.iter_mut().zip(row) {
                *o += c * b;
            }
        }
        out
    }

    /// Closest training exemplar as `(class index, euclidean distance)`.
    pub fn nearest(&self, face: &GrayImage) -> Result<(usize, f64), RecognitionError> {
        let p = self.project(face)?;
        Ok(self.nearest_projected(&p, None))
    }

    pub(crate) fn nearest_projected(&self, p: &[f64], skip: Option<usize>) -> (usize, f64) {
        let mut best = (0usize, f64::INFINITY);
        for (i, (class, e)) in self.exemplars.iter().enumerate() {
            if Some(i) == skip {
                continue;
            }
            let d: f64 = e.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if d < best.1 {
                best = (*class, d);
            }
        }
        best
    }
}

struct Prepared {
    width: u32,
    height: u32,
    classes: Vec<String>,
    labels: Vec<usize>,
    mean: DVector<f64>,
    /// Centered samples, one per row.
    centered: DMatrix<f64>,
}

fn prepare(faces: &[GrayImage], labels: &[String]) -> Result<Prepared, RecognitionError> {
    if faces.is_empty() {
        return Err(RecognitionError::Empty);
    }
    if faces.len() != labels.len() {
        return Err(RecognitionError::DimensionMismatch {
            expected: faces.len(),
            got: labels.len(),
        });
    }
    let (w, h) = (faces[0].width(), faces[0].height());
    let d = (w * h) as usize;
    if let Some(f) = faces.iter().find(|f| f.width() != w || f.height() != h) {
        return Err(RecognitionError::DimensionMismatch {
            expected: d,
            got: f.pixels().len(),
        });
    }
    let n = faces.len();
    let mut data = DMatrix::<f64>::zeros(n, d);
    for (i, f) in faces.iter().enumerate() {
        for (j, &p) in f.pixels().iter().enumerate() {
            data[(i, j)] = p as f64;
        }
    }
    let mean = DVector::from_iterator(d, data.column_iter().map(|c| c.sum() / n as f64));
    for mut row in data.row_iter_mut() {
        row -= mean.transpose();
    }
    let mut classes: Vec<String> = labels.to_vec();
    classes.sort();
    classes.dedup();
    let labels = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("collected above"))
        .collect();
    Ok(Prepared {
        width: w,
        height: h,
        classes,
        labels,
        mean,
        centered: data,
    })
}

/// Principal axes via the `n x n` gram matrix: returns orthonormal basis
/// rows (`k x d`) and the matching covariance eigenvalues.
fn pca(centered: &DMatrix<f64>, k: Option<usize>) -> Result<(DMatrix<f64>, Vec<f64>), RecognitionError> {
    let n = centered.nrows();
    let gram = centered * centered.transpose();
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let available = order
        .iter()
        .take_while(|&&i| top > 0.0 && eig.eigenvalues[i] > RANK_TOL * top)
        .count();
    let k = match k {
        Some(k) if k > available => {
            return Err(RecognitionError::TooManyComponents {
                requested: k,
                available,
            })
        }
        Some(k) => k,
        None => available,
    };
    let mut basis = DMatrix::<f64>::zeros(k, centered.ncols());
    let mut values = Vec::with_capacity(k);
    for (r, &i) in order.iter().take(k).enumerate() {
        let lambda = eig.eigenvalues[i];
        let u = centered.transpose() * eig.eigenvectors.column(i) / lambda.sqrt();
        basis.set_row(r, &u.transpose());
        values.push(lambda / n as f64);
    }
    Ok((basis, values))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn exemplars(basis: &DMatrix<f64>, p: &Prepared) -> Vec<(usize, Vec<f64>)> {
    let proj = &p.centered * basis.transpose();
    proj.row_iter()
        .zip(&p.labels)
        .map(|(r, &l)| (l, r.iter().copied().collect()))
        .collect()
}

pub fn train_eigenface(
    faces: &[GrayImage],
    labels: &[String],
    config: &SubspaceConfig,
) -> Result<SubspaceModel, RecognitionError> {
    let p = prepare(faces, labels)?;
    if faces.len() < 2 {
        return Err(RecognitionError::TooFewClasses { needed: 2, got: 1 });
    }
    let (basis, eigenvalues) = pca(&p.centered, config.num_components)?;
    if basis.nrows() == 0 {
        return Err(RecognitionError::SingularScatter);
    }
    Ok(SubspaceModel {
        kind: Backend::Eigenface,
        width: p.width,
        height: p.height,
        exemplars: exemplars(&basis, &p),
        mean: p.mean.iter().copied().collect(),
        basis: rows(&basis),
        eigenvalues,
        classes: p.classes,
    })
}

/// PCA down to `n - c` dimensions, then the `c - 1` directions maximizing
/// between-class over within-class scatter.
pub fn train_fisherface(faces: &[GrayImage], labels: &[String]) -> Result<SubspaceModel, RecognitionError> {
    let p = prepare(faces, labels)?;
    let (n, c) = (faces.len(), p.classes.len());
    if c < 2 {
        return Err(RecognitionError::TooFewClasses { needed: 2, got: c });
    }
    if n <= c {
        return Err(RecognitionError::SingularScatter);
    }
    let (pca_basis, _) = pca(&p.centered, None)?;
    if pca_basis.nrows() < n - c {
        return Err(RecognitionError::SingularScatter);
    }
    let pca_basis = pca_basis.rows(0, n - c).into_owned();
    let m = n - c;
    let y = &p.centered * pca_basis.transpose();

    let mut means = DMatrix::<f64>::zeros(c, m);
    let mut counts = vec![0usize; c];
    for (row, &l) in y.row_iter().zip(&p.labels) {
        let mut mr = means.row_mut(l);
        mr += row;
        counts[l] += 1;
    }
    for (l, &k) in counts.iter().enumerate() {
        let mut mr = means.row_mut(l);
        mr /= k as f64;
    }
    // y is centered, so the overall mean is zero
    let mut sw = DMatrix::<f64>::zeros(m, m);
    for (row, &l) in y.row_iter().zip(&p.labels) {
        let dv = (row - means.row(l)).transpose();
        sw += &dv * dv.transpose();
    }
    let mut sb = DMatrix::<f64>::zeros(m, m);
    for (l, &k) in counts.iter().enumerate() {
        let mv = means.row(l).transpose();
        sb += (&mv * mv.transpose()) * k as f64;
    }
    let chol = sw.cholesky().ok_or(RecognitionError::SingularScatter)?;
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or(RecognitionError::SingularScatter)?;
    let sym = &l_inv * sb * l_inv.transpose();
    let sym = (&sym + sym.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let keep = (c - 1).min(m);
    let mut lda = DMatrix::<f64>::zeros(keep, m);
    for (r, &i) in order.iter().take(keep).enumerate() {
        let v = l_inv.transpose() * eig.eigenvectors.column(i);
        let v = &v / v.norm();
        lda.set_row(r, &v.transpose());
    }
    let basis = lda * pca_basis;
    Ok(SubspaceModel {
        kind: Backend::Fisherface,
        width: p.width,
        height: p.height,
        exemplars: exemplars(&basis, &p),
        mean: p.mean.iter().copied().collect(),
        basis: rows(&basis),
        eigenvalues: Vec::new(),
        classes: p.classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_faces(n: usize, classes: usize, seed: u64) -> (Vec<GrayImage>, Vec<String>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let protos: Vec<GrayImage> = (0..classes)
            .map(|_| GrayImage::from_fn(8, 8, |_, _| rng.gen_range(40..215)))
            .collect();
        let mut faces = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = i % classes;
            let p = &protos[c];
            faces.push(GrayImage::from_fn(8, 8, |x, y| {
                (p.get(x, y) as i32 + rng.gen_range(-20..=20)) as u8
            }));
            labels.push(format!("c{c}"));
        }
        (faces, labels)
    }

    #[test]
    fn mean_projects_to_zero() {
        let (faces, labels) = random_faces(12, 3, 1);
        let m = train_eigenface(&faces, &labels, &SubspaceConfig::default()).unwrap();
        let coeffs = m.project_vec(m.mean());
        assert!(coeffs.iter().all(|c| c.abs() < 1e-9));
    }

    #[test]
    fn full_reconstruction() {
        let (faces, labels) = random_faces(10, 2, 2);
        let m = train_eigenface(&faces, &labels, &SubspaceConfig::default()).unwrap();
        assert_eq!(m.components(), 9);
        for f in &faces {
            let x: Vec<f64> = f.pixels().iter().map(|&p| p as f64).collect();
            let r = m.reconstruct(&m.project(f).unwrap());
            let err: f64 = x.iter().zip(&r).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(err / norm < 1e-6);
        }
    }

    #[test]
    fn too_many_components() {
        let (faces, labels) = random_faces(5, 2, 3);
        let cfg = SubspaceConfig {
            num_components: Some(5),
        };
        assert!(matches!(
            train_eigenface(&faces, &labels, &cfg),
            Err(RecognitionError::TooManyComponents { available: 4, .. })
        ));
    }

    #[test]
    fn fisher_two_classes_is_one_dimensional() {
        let (faces, labels) = random_faces(10, 2, 4);
        let m = train_fisherface(&faces, &labels).unwrap();
        assert_eq!(m.components(), 1);
        for (f, l) in faces.iter().zip(&labels) {
            let (c, _) = m.nearest(f).unwrap();
            assert_eq!(&m.classes()[c], l);
        }
    }

    #[test]
    fn fisher_degenerate_inputs() {
        let f = GrayImage::filled(4, 4, 9);
        let faces = vec![f.clone(), f.clone(), f.clone()];
        let labels = vec!["a".to_string(), "b".to_string(), "a".to_string()];
        assert!(matches!(
            train_fisherface(&faces, &labels),
            Err(RecognitionError::SingularScatter)
        ));
        let (faces, labels) = random_faces(2, 2, 5);
        assert!(matches!(
            train_fisherface(&faces, &labels),
            Err(RecognitionError::SingularScatter)
        ));
    }

    #[test]
    fn size_mismatch_rejected() {
        let (faces, labels) = random_faces(6, 2, 6);
        let m = train_eigenface(&faces, &labels, &SubspaceConfig::default()).unwrap();
        assert!(m.project(&GrayImage::filled(9, 8, 0)).is_err());
    }
}
