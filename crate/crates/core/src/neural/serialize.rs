//! Binary model dump: `DFLM`, format version, layer sizes, hidden
//! activations, then the flat parameter vector as little-endian `f32`.

use std::io::{Read, Write};

use super::{Activation, Mlp, MlpSpec, NeuralError};

const MAGIC: &[u8; 4] = b"DFLM";
const VERSION: u32 = 1;

pub fn write_model(model: &Mlp<f32>, mut out: impl Write) -> Result<(), NeuralError> {
    let spec = model.spec();
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(spec.layer_sizes().len() as u32).to_le_bytes())?;
    for &s in spec.layer_sizes() {
        out.write_all(&(s as u32).to_le_bytes())?;
    }
    for a in spec.hidden_activations() {
        let (code, param) = a.code();
        out.write_all(&code.to_le_bytes())?;
        out.write_all(&param.to_le_bytes())?;
    }
    for p in model.params() {
        out.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32(input: &mut impl Read) -> Result<u32, NeuralError> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_model(mut input: impl Read) -> Result<Mlp<f32>, NeuralError> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NeuralError::Format("bad magic".into()));
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(NeuralError::Format(format!("unsupported version {version}")));
    }
    let count = read_u32(&mut input)? as usize;
    if !(2..=64).contains(&count) {
        return Err(NeuralError::Format(format!("implausible layer count {count}")));
    }
    let sizes = (0..count)
        .map(|_| read_u32(&mut input).map(|s| s as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let mut acts = Vec::with_capacity(count - 2);
    for _ in 0..count - 2 {
        let code = read_u32(&mut input)?;
        let param = f32::from_bits(read_u32(&mut input)?);
        acts.push(
            Activation::from_code(code, param)
                .ok_or_else(|| NeuralError::Format(format!("unknown activation code {code}")))?,
        );
    }
    let spec = MlpSpec::new(sizes, acts)?;
    let mut params = Vec::with_capacity(spec.num_params());
    for _ in 0..spec.num_params() {
        params.push(f32::from_bits(read_u32(&mut input)?));
    }
    Mlp::from_params(&spec, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::init_model;

    #[test]
    fn round_trip() {
        let spec = MlpSpec::new(
            vec![6, 5, 4, 3],
            vec![Activation::Tanh, Activation::LeakyRelu { slope: 0.25 }],
        )
        .unwrap();
        let m: Mlp<f32> = init_model(&spec, 2.0, 8);
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        assert_eq!(read_model(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(
            read_model(&b"NOPE\x01\0\0\0"[..]),
            Err(NeuralError::Format(_))
        ));
        let spec = MlpSpec::uniform(&[2, 2], Activation::Relu).unwrap();
        let mut buf = Vec::new();
        write_model(&Mlp::zeros(&spec), &mut buf).unwrap();
        buf.pop();
        assert!(matches!(read_model(buf.as_slice()), Err(NeuralError::Io(_))));
    }
}
