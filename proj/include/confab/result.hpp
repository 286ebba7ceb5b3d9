#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <variant>

namespace confab {

// Machine-parsable error: a short category (stable, used for CLI exit
// classification and for test assertions) plus a human-readable message.
struct Error {
  std::string category;
  std::string message;

  std::string to_string() const { return category + ": " + message; }
};

inline Error make_error(std::string category, std::string message) {
  return Error{std::move(category), std::move(message)};
}

// Minimal expected-like carrier. Ok-or-Error; no exceptions on the happy path.
template <typename T>
class Result {
public:
  Result(T value) : data_(std::move(value)) {}
  Result(Error err) : data_(std::move(err)) {}

  bool ok() const { return std::holds_alternative<T>(data_); }
  explicit operator bool() const { return ok(); }

  const T& value() const& {
    if (!ok()) throw std::logic_error("Result::value on error: " + error().to_string());
    return std::get<T>(data_);
  }
  T& value() & {
    if (!ok()) throw std::logic_error("Result::value on error: " + error().to_string());
    return std::get<T>(data_);
  }
  T&& take() && {
    if (!ok()) throw std::logic_error("Result::take on error: " + error().to_string());
    return std::get<T>(std::move(data_));
  }

  const Error& error() const {
    return std::get<Error>(data_);
  }

private:
  std::variant<T, Error> data_;
};

// Result with no payload.
class Status {
public:
  Status() : err_() {}
  Status(Error err) : err_(std::move(err)), failed_(true) {}

  static Status ok_status() { return Status(); }

  bool ok() const { return !failed_; }
  explicit operator bool() const { return ok(); }
  const Error& error() const { return err_; }

private:
  Error err_;
  bool failed_ = false;
};

} // namespace confab
