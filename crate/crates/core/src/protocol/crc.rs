const POLY: u8 = 0x07;

const TABLE: [u8; 256] = {
    let mut table = [0u8; 256];
    let mut i = 0;
    while i < 256 {
        let mut c = i as u8;
        let mut bit = 0;
        while bit < 8 {
            c = if c & 0x80 != 0 {
                (c << 1) ^ POLY
            } else {
                c << 1
            };
            bit += 1;
        }
        table[i] = c;
        i += 1;
    }
    table
};

/// CRC-8 with polynomial 0x07, zero init, no reflection, no final xor.
pub fn crc8(data: &[u8]) -> u8 {
    data.iter().fold(0u8, |c, &b| TABLE[(c ^ b) as usize])
}
