#include "ecbsim/digest.hpp"

#include <openssl/evp.h>

#include <cstdio>

namespace ecbsim {

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
    std::string out(static_cast<size_t>(len) * 2, '\0');
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(out.data() + 2 * i, 3, "%02x", md[i]);
    }
    return out;
}

std::string short_digest(const std::string& data, size_t n) {
    std::string full = sha256_hex(data);
    return full.substr(0, n);
}

} // namespace ecbsim
