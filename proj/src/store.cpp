#include "fulsim/store.hpp"

#include <fstream>
#include <iterator>

namespace fulsim::store {

std::string_view to_string(Namespace ns) { return ns == Namespace::live ? "live" : "archive"; }

ContentUri ContentUri::parse(std::string_view text) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos) throw Error("store: malformed uri '" + std::string(text) + "'");
  auto prefix = text.substr(0, colon);
  auto digest = text.substr(colon + 1);
  if ((prefix != "live" && prefix != "archive") || digest.size() != 64) {
    throw Error("store: malformed uri '" + std::string(text) + "'");
  }
  from_hex(digest);
  return ContentUri(std::string(text));
}

ContentUri ContentUri::of(Namespace ns, ByteView content) {
  return ContentUri(std::string(to_string(ns)) + ":" + to_hex(sha256(content)));
}

Namespace ContentUri::ns() const {
  return text_.starts_with("archive:") ? Namespace::archive : Namespace::live;
}

std::string ContentUri::digest_hex() const {
  auto colon = text_.find(':');
  return colon == std::string::npos ? std::string{} : text_.substr(colon + 1);
}

ContentStore::ContentStore(const ContentStore& other) {
  std::lock_guard lock(other.mutex_);
  blobs_ = other.blobs_;
}

ContentStore& ContentStore::operator=(const ContentStore& other) {
  if (this != &other) {
    std::scoped_lock lock(mutex_, other.mutex_);
    blobs_ = other.blobs_;
  }
  return *this;
}

ContentUri ContentStore::put(ByteView content, Namespace ns) {
  ContentUri uri = ContentUri::of(ns, content);
  std::lock_guard lock(mutex_);
  blobs_.try_emplace(uri, content.begin(), content.end());
  return uri;
}

Bytes ContentStore::get(const ContentUri& uri) const {
  std::lock_guard lock(mutex_);
  auto it = blobs_.find(uri);
  if (it == blobs_.end()) throw UnknownUri("store: unknown uri '" + uri.text() + "'");
  return it->second;
}

bool ContentStore::contains(const ContentUri& uri) const {
  std::lock_guard lock(mutex_);
  return blobs_.contains(uri);
}

std::size_t ContentStore::size() const {
  std::lock_guard lock(mutex_);
  return blobs_.size();
}

void ContentStore::save_to_directory(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::lock_guard lock(mutex_);
  for (const auto& [uri, blob] : blobs_) {
    std::string name = uri.text();
    name[name.find(':')] = '_';
    std::ofstream out(dir / name, std::ios::binary);
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    if (!out) throw Error("store: failed writing " + (dir / name).string());
  }
}

ContentStore ContentStore::load_from_directory(const std::filesystem::path& dir) {
  ContentStore store;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string name = entry.path().filename().string();
    auto sep = name.find('_');
    if (sep == std::string::npos) continue;
    name[sep] = ':';
    ContentUri uri = ContentUri::parse(name);
    std::ifstream in(entry.path(), std::ios::binary);
    Bytes blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (ContentUri::of(uri.ns(), blob) != uri) throw Error("store: content does not match uri " + name);
    store.blobs_.emplace(uri, std::move(blob));
  }
  return store;
}

bool ContentStore::operator==(const ContentStore& other) const {
  if (this == &other) return true;
  std::scoped_lock lock(mutex_, other.mutex_);
  return blobs_ == other.blobs_;
}

}  // namespace fulsim::store
