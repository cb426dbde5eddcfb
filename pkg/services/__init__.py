"""
Services for the QELM molecular PES/FF toolkit
"""
