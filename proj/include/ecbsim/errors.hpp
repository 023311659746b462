#pragma once

#include <stdexcept>
#include <string>

namespace ecbsim {

// Error categories map 1:1 to CLI exit codes (0 = success).
enum class ErrorCategory : int {
    Validation = 2,
    Provider = 3,
    Data = 4,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& message)
        : std::runtime_error(message), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }
    int exit_code() const noexcept { return static_cast<int>(category_); }

private:
    ErrorCategory category_;
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& message)
        : Error(ErrorCategory::Validation, message) {}
};

struct DataError : Error {
    explicit DataError(const std::string& message)
        : Error(ErrorCategory::Data, message) {}
};

struct ProviderError : Error {
    ProviderError(int status, const std::string& body)
        : Error(ErrorCategory::Provider,
                "provider error (status " + std::to_string(status) + "): " + body),
          status(status) {}
    explicit ProviderError(const std::string& message)
        : Error(ErrorCategory::Provider, message), status(0) {}
    int status;
};

} // namespace ecbsim
