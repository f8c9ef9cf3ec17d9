//! Elias-gamma code for the transmitted index: `⌊log2 i⌋` zeros followed
//! by the binary expansion of `i`.

use crate::error::{Error, Result};

/// Codeword length `2⌊log2 i⌋ + 1`.
pub fn gamma_length(i: u64) -> Result<u32> {
    if i == 0 {
        return Err(Error::invalid("Elias-gamma code is defined for i >= 1"));
    }
    Ok(2 * i.ilog2() + 1)
}

pub fn encode_index(i: u64) -> Result<String> {
    let len = gamma_length(i)?;
    let bits = i.ilog2() + 1;
    let mut out = String::with_capacity(len as usize);
    out.extend(std::iter::repeat_n('0', (bits - 1) as usize));
    out.extend(
        (0..bits)
            .rev()
            .map(|b| if (i >> b) & 1 == 1 { '1' } else { '0' }),
    );
    Ok(out)
}

/// Decodes one codeword from the front of `bits`, returning the index and
/// the number of characters consumed.
pub fn decode_index(bits: &str) -> Result<(u64, usize)> {
    let bytes = bits.as_bytes();
    if let Some(bad) = bytes.iter().find(|&&b| b != b'0' && b != b'1') {
        return Err(Error::invalid(format!(
            "unexpected symbol {:?}",
            *bad as char
        )));
    }
    let zeros = bytes.iter().take_while(|&&b| b == b'0').count();
    if zeros >= 64 {
        return Err(Error::invalid("codeword exceeds 64-bit range"));
    }
    let end = 2 * zeros + 1;
    if bytes.len() < end {
        return Err(Error::invalid("truncated codeword"));
    }
    let value = bytes[zeros..end]
        .iter()
        .fold(0u64, |acc, &b| (acc << 1) | u64::from(b - b'0'));
    Ok((value, end))
}
