//! CRC-64/XZ (reflected, poly 0x42F0E1EBA9EA3693, init/xorout all-ones),
//! used to checksum each weight tensor in the blob.

const POLY_REFLECTED: u64 = 0xC96C_5795_D787_0F42;

fn table() -> [u64; 256] {
    let mut table = [0u64; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = i as u64;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 1 != 0 {
                (crc >> 1) ^ POLY_REFLECTED
            } else {
                crc >> 1
            };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}

static TABLE: std::sync::OnceLock<[u64; 256]> = std::sync::OnceLock::new();

pub fn crc64_xz(bytes: &[u8]) -> u64 {
    let table = TABLE.get_or_init(table);
    let mut crc = !0u64;
    for &b in bytes {
        crc = table[((crc ^ b as u64) & 0xFF) as usize] ^ (crc >> 8);
    }
    !crc
}
