#pragma once

// In-process content-addressed blob store. URIs are "<namespace>:<sha256 hex>"
// so the live and archive instances share one process without sharing keys.

#include <filesystem>
#include <map>
#include <mutex>
#include <string>

#include "fulsim/common.hpp"

namespace fulsim::store {

enum class Namespace { live, archive };

std::string_view to_string(Namespace ns);

class ContentUri {
 public:
  ContentUri() = default;
  static ContentUri parse(std::string_view text);
  static ContentUri of(Namespace ns, ByteView content);

  const std::string& text() const { return text_; }
  Namespace ns() const;
  std::string digest_hex() const;
  bool empty() const { return text_.empty(); }

  auto operator<=>(const ContentUri&) const = default;

 private:
  explicit ContentUri(std::string text) : text_(std::move(text)) {}
  std::string text_;
};

class UnknownUri : public Error {
 public:
  using Error::Error;
};

class ContentStore {
 public:
  ContentStore() = default;
  ContentStore(const ContentStore& other);
  ContentStore& operator=(const ContentStore& other);

  ContentUri put(ByteView content, Namespace ns = Namespace::live);
  Bytes get(const ContentUri& uri) const;
  bool contains(const ContentUri& uri) const;
  std::size_t size() const;

  // One file per URI; the file name is the URI with ':' replaced by '_'.
  void save_to_directory(const std::filesystem::path& dir) const;
  static ContentStore load_from_directory(const std::filesystem::path& dir);

  bool operator==(const ContentStore& other) const;

 private:
  mutable std::mutex mutex_;
  std::map<ContentUri, Bytes> blobs_;
};

}  // namespace fulsim::store
