#include <filesystem>
#include <random>
#include <set>

#include "doctest.h"
#include "fulsim/store.hpp"

using namespace fulsim;
using namespace fulsim::store;

TEST_CASE("put is content addressed and idempotent") {
  ContentStore s;
  Bytes b = {1, 2, 3};
  auto u1 = s.put(b);
  auto u2 = s.put(b);
  CHECK(u1 == u2);
  CHECK(s.size() == 1);
  CHECK(u1.text() == "live:" + to_hex(sha256(ByteView(b))));
  CHECK(s.get(u1) == b);
}

TEST_CASE("empty content gets the empty-string digest") {
  ContentStore s;
  auto u = s.put(Bytes{});
  CHECK(u.digest_hex() == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(s.get(u).empty());
}

TEST_CASE("namespaces keep separate keys") {
  ContentStore s;
  Bytes b = {9};
  auto live = s.put(b, Namespace::live);
  auto arch = s.put(b, Namespace::archive);
  CHECK(live != arch);
  CHECK(live.digest_hex() == arch.digest_hex());
  CHECK(arch.ns() == Namespace::archive);
  CHECK(ContentUri::parse(arch.text()) == arch);
}

TEST_CASE("unknown and malformed uris") {
  ContentStore s;
  CHECK_THROWS_AS(s.get(ContentUri::of(Namespace::live, Bytes{1})), UnknownUri);
  CHECK_THROWS_AS(ContentUri::parse("ipfs:abcd"), Error);
  CHECK_THROWS_AS(ContentUri::parse("live:xyz"), Error);
}

TEST_CASE("1000 random blobs produce no uri collisions") {
  ContentStore s;
  std::mt19937_64 rng(3);
  std::set<std::string> uris;
  std::set<Bytes> blobs;
  for (int i = 0; i < 1000; ++i) {
    Bytes b(1 + rng() % 32);
    for (auto& x : b) x = static_cast<std::uint8_t>(rng());
    blobs.insert(b);
    uris.insert(s.put(b).text());
  }
  CHECK(uris.size() == blobs.size());
}

TEST_CASE("directory round trip") {
  ContentStore s;
  s.put(Bytes{1, 2});
  s.put(Bytes{3}, Namespace::archive);
  auto dir = std::filesystem::temp_directory_path() / "fulsim_store_test";
  std::filesystem::remove_all(dir);
  s.save_to_directory(dir);
  auto loaded = ContentStore::load_from_directory(dir);
  CHECK(loaded == s);
  std::filesystem::remove_all(dir);
}
