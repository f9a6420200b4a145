#pragma once

#include <string>

namespace fixtures {

// Non-flaky serialization test used as the dead-code injection target.
inline const std::string kSerializationTest = R"(@Test
public void serializationRoundTripTest() throws Exception {
    // Test serializing and deserializing
    final Event event = Event.create("create", "foo", "nginx",
    Event.Type.CONTAINER,
    Event.Actor.create("bar",
    ImmutableMap.of("image", "nginx", "name", "dckr")),
    new Date(1487356000), 100L);

    final ObjectMapper mapper = ObjectMapperProvider.mapper();
    final String json = mapper.writeValueAsString(event);
    final Event event2 = mapper.readValue(json, Event.class);
    assertEquals(event, event2);
}
)";

// Time-flaky speed test with meaningful variable names.
inline const std::string kSpeedTest = R"(@Test
public void testMatchesSpeedTest() throws Exception {
    int iterations = 15;
    String password = new RandomValueStringGenerator().generate();
    String encodedBcrypt = cachingPasswordEncoder.encode(password);

    long nanoStart = System.nanoTime();
    for (int i = 0; i < iterations; i++) {
        assertTrue(cachingPasswordEncoder.getPasswordEncoder().
        matches(password, encodedBcrypt));

        long nanoStop = System.nanoTime();
        long bcryptTime = nanoStop - nanoStart;

        nanoStart = System.nanoTime();
        for (int j = 0; j < iterations; j++) {
            nanoStop = System.nanoTime();
            long cacheTime = nanoStop - nanoStart;
            assertTrue(bcryptTime > (10 * cacheTime));
        }
    }
}
)";

// The same test after renaming the time variables.
inline const std::string kSpeedTestRenamed = R"(@Test
public void testMatchesSpeedTest() throws Exception {
    int _loopMax = 15;
    String _s1 = new RandomValueStringGenerator().generate();
    String _s2 = cachingPasswordEncoder.encode(_s1);

    long _t1 = System.nanoTime();
    for (int i = 0; i < _loopMax; i++) {
        assertTrue(cachingPasswordEncoder.getPasswordEncoder().
        matches(_s1, _s2));

        long _t2 = System.nanoTime();
        long _valA = _t2 - _t1;

        _t1 = System.nanoTime();
        for (int j = 0; j < _loopMax; j++) {
            _t2 = System.nanoTime();
            long _valB = _t2 - _t1;
            assertTrue(_valA > (10 * _valB));
        }
    }
}
)";

}  // namespace fixtures
