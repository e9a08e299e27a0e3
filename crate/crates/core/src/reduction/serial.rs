use super::{FittedReducer, MethodState, ReducerSpec, ReductionError};
use crate::codec::{BlobReader, BlobWriter, CodecError};

const MAGIC: [u8; 4] = *b"HYFR";
const VERSION: u32 = 1;

pub(super) fn encode(r: &FittedReducer) -> Vec<u8> {
    let mut w = BlobWriter::new(MAGIC, VERSION);
    w.u8(r.spec.method.tag());
    w.str(&serde_json::to_string(&r.spec).expect("spec serializes"));
    w.matrix(&r.train_x);
    w.matrix(&r.embedding);
    match &r.state {
        MethodState::Pca {
            mean,
            components,
            eigenvalues,
        } => {
            w.u8(0);
            w.f64s(mean);
            w.matrix(components);
            w.f64s(eigenvalues);
        }
        MethodState::Barycentric => w.u8(1),
        MethodState::Precomputed => w.u8(2),
    }
    w.str(&serde_json::to_string(&r.diagnostics).expect("diagnostics serialize"));
    w.finish()
}

pub(super) fn decode(b: &[u8]) -> Result<FittedReducer, ReductionError> {
    let (mut r, version) = BlobReader::open(b, MAGIC)?;
    if version != VERSION {
        return Err(CodecError::UnsupportedVersion(version).into());
    }
    let tag = r.u8()?;
    let spec: ReducerSpec =
        serde_json::from_str(&r.str()?).map_err(|e| CodecError::Invalid(format!("reducer spec: {e}")))?;
    if super::Method::from_tag(tag) != Some(spec.method) {
        return Err(CodecError::Invalid(format!("method tag {tag} disagrees with spec")).into());
    }
    let train_x = r.matrix()?;
    let embedding = r.matrix()?;
    let state = match r.u8()? {
        0 => MethodState::Pca {
            mean: r.f64s()?,
            components: r.matrix()?,
            eigenvalues: r.f64s()?,
        },
        1 => MethodState::Barycentric,
        2 => MethodState::Precomputed,
        t => return Err(CodecError::Invalid(format!("state tag {t}")).into()),
    };
    let diagnostics =
        serde_json::from_str(&r.str()?).map_err(|e| CodecError::Invalid(format!("diagnostics: {e}")))?;
    r.finish()?;
    Ok(FittedReducer {
        spec,
        train_x,
        embedding,
        state,
        diagnostics,
    })
}
