#include "qkdlab/rsa_demo.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace qkdlab {

namespace {

using u128 = unsigned __int128;

std::uint64_t random_prime(unsigned bits, std::mt19937_64& rng) {
  // Top two bits set so the product of two such primes has full length.
  const std::uint64_t top = (std::uint64_t{1} << (bits - 1)) | (std::uint64_t{1} << (bits - 2));
  const std::uint64_t mask = bits == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bits) - 1;
  while (true) {
    const std::uint64_t candidate = ((rng() & mask) | top | 1U);
    if (is_prime(candidate)) return candidate;
  }
}

// Inverse of a modulo m, assuming gcd(a, m) = 1.
std::uint64_t inverse_mod(std::uint64_t a, std::uint64_t m) {
  __int128 t = 0, new_t = 1;
  __int128 r = m, new_r = a;
  while (new_r != 0) {
    const __int128 q = r / new_r;
    t -= q * new_t;
    std::swap(t, new_t);
    r -= q * new_r;
    std::swap(r, new_r);
  }
  if (r != 1) throw std::logic_error("inverse_mod: not invertible");
  if (t < 0) t += m;
  return static_cast<std::uint64_t>(t);
}

}  // namespace

std::uint64_t mul_mod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>(static_cast<u128>(a) * b % m);
}

std::uint64_t pow_mod(std::uint64_t base, std::uint64_t exp, std::uint64_t m) {
  if (m == 1) return 0;
  std::uint64_t result = 1;
  base %= m;
  while (exp > 0) {
    if (exp & 1U) result = mul_mod(result, base, m);
    base = mul_mod(base, base, m);
    exp >>= 1;
  }
  return result;
}

bool is_prime(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t p : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
    if (n % p == 0) return n == p;
  }
  std::uint64_t d = n - 1;
  int s = 0;
  while ((d & 1U) == 0) {
    d >>= 1;
    ++s;
  }
  for (std::uint64_t a : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
    std::uint64_t x = pow_mod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int r = 1; r < s; ++r) {
      x = mul_mod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

RsaKey generate_rsa_key(unsigned modulus_bits, std::mt19937_64& rng) {
  if (modulus_bits < 16 || modulus_bits > 64) {
    throw std::invalid_argument("generate_rsa_key: modulus_bits must be in [16, 64]");
  }
  const unsigned p_bits = (modulus_bits + 1) / 2;
  const unsigned q_bits = modulus_bits / 2;
  RsaKey k;
  do {
    k.p = random_prime(p_bits, rng);
    k.q = random_prime(q_bits, rng);
  } while (k.p == k.q);
  k.n = static_cast<std::uint64_t>(static_cast<u128>(k.p) * k.q);
  const std::uint64_t phi = (k.p - 1) * (k.q - 1);
  k.e = 65537;
  if (k.e >= phi || std::gcd(k.e, phi) != 1) {
    k.e = 3;
    while (std::gcd(k.e, phi) != 1) k.e += 2;
  }
  k.d = inverse_mod(k.e, phi);
  return k;
}

std::uint64_t rsa_encrypt(const RsaKey& key, std::uint64_t m) {
  if (m >= key.n) throw std::invalid_argument("rsa_encrypt: message must be below the modulus");
  return pow_mod(m, key.e, key.n);
}

std::uint64_t rsa_decrypt(const RsaKey& key, std::uint64_t c) {
  if (c >= key.n) throw std::invalid_argument("rsa_decrypt: ciphertext must be below the modulus");
  return pow_mod(c, key.d, key.n);
}

AuctionTranscript rsa_malleability_demo(unsigned modulus_bits, std::uint64_t honest_bid, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AuctionTranscript t;
  t.modulus_bits = modulus_bits;
  t.seed = seed;
  t.key = generate_rsa_key(modulus_bits, rng);
  if (2 * static_cast<u128>(honest_bid) >= t.key.n) {
    throw std::invalid_argument("rsa_malleability_demo: bid " + std::to_string(honest_bid) +
                                " must be below n/2 = " + std::to_string(t.key.n / 2));
  }
  t.honest_bid = honest_bid;
  t.ciphertext = rsa_encrypt(t.key, honest_bid);
  t.forged_ciphertext = mul_mod(pow_mod(2, t.key.e, t.key.n), t.ciphertext, t.key.n);
  t.forged_bid = rsa_decrypt(t.key, t.forged_ciphertext);
  t.roundtrip_ok = rsa_decrypt(t.key, t.ciphertext) == honest_bid;
  t.doubling_ok = t.forged_bid == 2 * honest_bid;
  t.tie = t.forged_bid == honest_bid;
  t.bob_wins = t.forged_bid > honest_bid;
  return t;
}

Json to_json(const AuctionTranscript& t) {
  return Json{{"modulus_bits", t.modulus_bits},
              {"seed", t.seed},
              {"n", t.key.n},
              {"e", t.key.e},
              {"d", t.key.d},
              {"p", t.key.p},
              {"q", t.key.q},
              {"honest_bid", t.honest_bid},
              {"ciphertext", t.ciphertext},
              {"forged_ciphertext", t.forged_ciphertext},
              {"forged_bid", t.forged_bid},
              {"roundtrip_ok", t.roundtrip_ok},
              {"doubling_ok", t.doubling_ok},
              {"tie", t.tie},
              {"bob_wins", t.bob_wins}};
}

}  // namespace qkdlab
