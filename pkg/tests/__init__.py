# Test module for the MOHSA toolkit
