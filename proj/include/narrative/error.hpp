#pragma once

#include <stdexcept>
#include <string>

namespace narrative {

/// Base for every error raised by the pipeline. The CLI maps these to exit 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

/// Model output that could not be mapped onto the expected structure.
/// Keeps the raw response so callers can log or persist it.
class StructuredOutputError : public Error {
public:
    StructuredOutputError(const std::string& what, std::string raw)
        : Error(what), raw_(std::move(raw)) {}
    const std::string& raw() const noexcept { return raw_; }

private:
    std::string raw_;
};

class CacheMissError : public Error {
public:
    explicit CacheMissError(std::string fingerprint, const std::string& context = "")
        : Error("cassette miss for fingerprint " + fingerprint + (context.empty() ? "" : " (" + context + ")")),
          fingerprint_(std::move(fingerprint)) {}
    const std::string& fingerprint() const noexcept { return fingerprint_; }

private:
    std::string fingerprint_;
};

class TransportError : public Error {
public:
    using Error::Error;
};

/// Runs f, re-raising model-call failures with `ctx` (e.g. "community 3")
/// attached so a replay miss names the item that needed the call.
template <class F>
auto with_context(const std::string& ctx, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const CacheMissError& e) {
        throw CacheMissError(e.fingerprint(), ctx);
    } catch (const StructuredOutputError& e) {
        throw StructuredOutputError(ctx + ": " + e.what(), e.raw());
    } catch (const TransportError& e) {
        throw TransportError(ctx + ": " + e.what());
    }
}

}  // namespace narrative
