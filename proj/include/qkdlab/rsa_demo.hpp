// Textbook RSA at toy sizes, used to show malleability: from c = m^e mod n
// anyone can form 2^e·c mod n, which decrypts to 2m. A sealed-bid auction
// where Bob submits the forged ciphertext always outbids Alice.
#pragma once

#include <cstdint>
#include <random>

#include "qkdlab/serialization.hpp"

namespace qkdlab {

/// (a·b) mod m and a^k mod m on 64-bit operands via 128-bit intermediates.
std::uint64_t mul_mod(std::uint64_t a, std::uint64_t b, std::uint64_t m);
std::uint64_t pow_mod(std::uint64_t base, std::uint64_t exp, std::uint64_t m);

/// Deterministic Miller–Rabin, exact for every 64-bit input.
bool is_prime(std::uint64_t n);

struct RsaKey {
  std::uint64_t p = 0;
  std::uint64_t q = 0;
  std::uint64_t n = 0;
  std::uint64_t e = 0;
  std::uint64_t d = 0;
};

/// n has exactly `modulus_bits` bits (16..64); e is 65537 when admissible,
/// otherwise the smallest odd exponent coprime to φ(n).
RsaKey generate_rsa_key(unsigned modulus_bits, std::mt19937_64& rng);

std::uint64_t rsa_encrypt(const RsaKey& key, std::uint64_t m);
std::uint64_t rsa_decrypt(const RsaKey& key, std::uint64_t c);

struct AuctionTranscript {
  unsigned modulus_bits = 0;
  std::uint64_t seed = 0;
  RsaKey key;
  std::uint64_t honest_bid = 0;
  std::uint64_t ciphertext = 0;
  std::uint64_t forged_ciphertext = 0;
  std::uint64_t forged_bid = 0;
  /// decrypt(encrypt(m)) = m and decrypt(2^e c) = 2m.
  bool roundtrip_ok = false;
  bool doubling_ok = false;
  bool tie = false;
  bool bob_wins = false;
};

/// Generates a key from `seed`, encrypts Alice's bid and lets Bob bid with
/// 2^e·c mod n. Throws std::invalid_argument for modulus_bits outside
/// [16, 64] or 2·honest_bid ≥ n, where doubling would wrap around.
AuctionTranscript rsa_malleability_demo(unsigned modulus_bits, std::uint64_t honest_bid, std::uint64_t seed);

Json to_json(const AuctionTranscript& t);

}  // namespace qkdlab
