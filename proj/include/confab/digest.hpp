#pragma once

#include <string>
#include <string_view>

namespace confab {

// Hex-encoded SHA-256 of the input bytes.
std::string sha256_hex(std::string_view data);

// Hex-encoded HMAC-SHA256. Stands in for package signing; the shared secret
// comes from configuration.
std::string hmac_sha256_hex(std::string_view key, std::string_view data);

} // namespace confab
