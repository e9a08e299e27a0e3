use super::{
    barycentric, check_input, classical_mds, Diagnostics, DisconnectedPolicy, FittedReducer, MethodState, ReducerSpec,
    ReductionError,
};
use crate::numerics::{euclidean, knn_graph, shortest_paths, Matrix, Metric};

/// Classical MDS on k-NN graph geodesics.
///
/// A disconnected graph is either restricted to its largest component, with
/// the other points placed by the barycentric extension, or bridged by the
/// closest pair of points between every two components. Both record a warning.
pub fn isomap_fit(x: &Matrix, spec: &ReducerSpec) -> Result<FittedReducer, ReductionError> {
    check_input(x, spec, 3)?;
    let n = x.rows();
    let k = spec.neighbors();
    if k >= n {
        return Err(ReductionError::NeighborsTooLarge { k, n });
    }
    let g = knn_graph(x, k, Metric::Euclidean)?;
    let comps = g.components();
    let mut diagnostics = Diagnostics {
        n_neighbors_used: Some(k),
        ..Default::default()
    };
    if comps.len() > 1 && spec.disconnected == DisconnectedPolicy::Bridge {
        diagnostics.warnings.push(format!(
            "isomap: neighbor graph has {} components {:?}; bridged by closest pairs",
            comps.len(),
            comps.iter().map(Vec::len).collect::<Vec<_>>()
        ));
        let mut adj = g.symmetrized();
        for a in 0..comps.len() {
            for b in (a + 1)..comps.len() {
                let mut best = (f64::INFINITY, 0, 0);
                for &i in &comps[a] {
                    for &j in &comps[b] {
                        let d = euclidean(x.row(i), x.row(j));
                        if d < best.0 {
                            best = (d, i, j);
                        }
                    }
                }
                adj[best.1].push((best.2, best.0));
                adj[best.2].push((best.1, best.0));
            }
        }
        let embedding = classical_mds(&shortest_paths(&adj), spec.target_dim)?;
        return Ok(FittedReducer {
            spec: spec.clone(),
            train_x: x.clone(),
            embedding,
            state: MethodState::Barycentric,
            diagnostics,
        });
    }
    let keep = &comps[0];
    if comps.len() > 1 {
        diagnostics.warnings.push(format!(
            "isomap: neighbor graph has {} components {:?}; embedding the largest ({} points) and extending the rest",
            comps.len(),
            comps.iter().map(Vec::len).collect::<Vec<_>>(),
            keep.len()
        ));
    }
    if keep.len() <= spec.target_dim {
        return Err(ReductionError::TooFewPoints {
            need: spec.target_dim + 1,
            got: keep.len(),
        });
    }
    let mut pos = vec![usize::MAX; n];
    for (p, &i) in keep.iter().enumerate() {
        pos[i] = p;
    }
    let adj: Vec<Vec<(usize, f64)>> = g
        .symmetrized()
        .into_iter()
        .enumerate()
        .filter(|(i, _)| pos[*i] != usize::MAX)
        .map(|(_, list)| list.into_iter().map(|(j, d)| (pos[j], d)).collect())
        .collect();
    let geo = shortest_paths(&adj);
    let sub = classical_mds(&geo, spec.target_dim)?;

    let mut embedding = Matrix::zeros(n, spec.target_dim);
    for (p, &i) in keep.iter().enumerate() {
        embedding.row_mut(i).copy_from_slice(sub.row(p));
    }
    if keep.len() < n {
        let rest: Vec<usize> = (0..n).filter(|&i| pos[i] == usize::MAX).collect();
        let placed = barycentric(&x.select_rows(keep), &sub, &x.select_rows(&rest), spec.oos_neighbors.max(1));
        for (r, &i) in rest.iter().enumerate() {
            embedding.row_mut(i).copy_from_slice(placed.row(r));
        }
    }
    Ok(FittedReducer {
        spec: spec.clone(),
        train_x: x.clone(),
        embedding,
        state: MethodState::Barycentric,
        diagnostics,
    })
}
